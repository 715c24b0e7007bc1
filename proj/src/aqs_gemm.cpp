#include "aqs/aqs_gemm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace aqs {
namespace {

constexpr std::size_t kV = kVectorLen;

std::size_t groups(std::size_t n) { return (n + kV - 1) / kV; }

std::int32_t narrow(std::int64_t v, const char* what) {
  if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max()) {
    throw Error(ErrorCode::kOverflow, std::string(what) + " exceeds int32: " + std::to_string(v));
  }
  return static_cast<std::int32_t>(v);
}

IntMatrix narrow_matrix(std::size_t rows, std::size_t cols, const std::vector<std::int64_t>& v, const char* what) {
  IntMatrix out(rows, cols);
  for (std::size_t i = 0; i < v.size(); ++i) out.data[i] = narrow(v[i], what);
  return out;
}

int activation_ho_shift(const QuantParams& px) {
  return px.lo_width == 4 ? px.bit_width - 4 : px.lo_width;
}

// Shared by both compensation forms. For eq5 the accumulated set is C(n)
// (stored flag 0); for eq6 it is U(n) and the result is b_prime minus the sum.
std::vector<std::int64_t> compensation(const IntMatrix& w_int, std::size_t w_planes,
                                       std::span<const std::uint8_t> x_stored, std::size_t n_cols, std::int32_t r,
                                       int l, CompMode mode, const IntMatrix* b_prime, WorkloadCounters* counters) {
  const std::size_t M = w_int.rows;
  const std::size_t K = w_int.cols;
  const std::size_t NG = groups(n_cols);
  if (x_stored.size() != K * NG) throw Error(ErrorCode::kShapeMismatch, "activation mask does not match K x N");
  std::vector<std::int64_t> out(M * n_cols, 0);
  if (r == 0) return out;
  if (mode == CompMode::kEq6 && (b_prime == nullptr || b_prime->rows != M || b_prime->cols != 1)) {
    throw Error(ErrorCode::kShapeMismatch, "b_prime must be M x 1");
  }

  const std::int64_t scale = std::int64_t{r} << l;
  const std::uint8_t wanted = mode == CompMode::kEq5 ? 0 : 1;
  std::vector<std::int64_t> sums(M);
  for (std::size_t ng = 0; ng < NG; ++ng) {
    std::fill(sums.begin(), sums.end(), 0);
    std::size_t selected = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (x_stored[k * NG + ng] != wanted) continue;
      ++selected;
      for (std::size_t m = 0; m < M; ++m) sums[m] += w_int(m, k);
    }
    const std::size_t n_end = std::min(n_cols, (ng + 1) * kV);
    for (std::size_t m = 0; m < M; ++m) {
      const std::int64_t term = mode == CompMode::kEq5 ? scale * sums[m] : std::int64_t{(*b_prime)(m, 0)} - scale * sums[m];
      for (std::size_t n = ng * kV; n < n_end; ++n) out[m * n_cols + n] = term;
    }
    if (counters != nullptr) {
      const std::uint64_t tiles = groups(M);
      counters->compensation_mults += 16 * tiles;
      counters->compensation_adds += tiles * kV * w_planes * selected;
      if (mode == CompMode::kEq5) counters->compensation_dram_nibbles += tiles * kV * w_planes * selected;
    }
  }
  return out;
}

struct DecodedOperand {
  SlicedMatrix planes;       // HO first when present
  std::vector<std::uint8_t> stored;  // HO vector flags, empty when no HO plane
  bool has_ho = false;
};

DecodedOperand decode(const CompressedOperand& op) {
  DecodedOperand d{decompress_operand(op), {}, op.ho.has_value()};
  if (op.ho) d.stored = stored_vector_mask(*op.ho);
  return d;
}

std::uint64_t operand_nibbles(const CompressedOperand& op, std::size_t vectors) {
  std::uint64_t n = 0;
  if (op.ho) n += kV * op.ho->record_count();
  n += kV * vectors * op.lo_planes.size();
  return n;
}

}  // namespace

const char* to_string(CompMode mode) noexcept { return mode == CompMode::kEq5 ? "eq5" : "eq6"; }

IntMatrix make_b_prime(const IntMatrix& w_int, std::int32_t r, int l) {
  IntMatrix out(w_int.rows, 1);
  for (std::size_t m = 0; m < w_int.rows; ++m) {
    std::int64_t s = 0;
    for (const auto v : w_int.row(m)) s += v;
    out(m, 0) = narrow((std::int64_t{r} << l) * s, "b_prime");
  }
  return out;
}

void GemmOperands::validate() const {
  if (w.scheme != SliceScheme::kSbrWeight) throw Error(ErrorCode::kInvalidArgument, "weights must be SBR-sliced");
  if (x.scheme == SliceScheme::kSbrWeight) throw Error(ErrorCode::kInvalidArgument, "activations must be unsigned slices");
  if (w.cols != x.rows) {
    throw Error(ErrorCode::kShapeMismatch, "W is " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                                               " but x is " + std::to_string(x.rows) + "x" + std::to_string(x.cols));
  }
  if (params_x.scheme != QuantScheme::kAsymmetric) {
    throw Error(ErrorCode::kInvalidArgument, "activation params must be asymmetric");
  }
  if (x.ho) {
    if (x.ho->skip_value != params_x.skip_value) {
      throw Error(ErrorCode::kInvalidArgument, "skip value of the activation HO plane (" +
                                                   std::to_string(x.ho->skip_value) + ") differs from params (" +
                                                   std::to_string(params_x.skip_value) + ")");
    }
    if (x.ho->shift != activation_ho_shift(params_x)) {
      throw Error(ErrorCode::kInvalidArgument, "activation HO shift does not match lo_width");
    }
  }
  if (!b_hat.empty() && (b_hat.rows != M() || b_hat.cols != 1)) {
    throw Error(ErrorCode::kShapeMismatch, "b_hat must be M x 1");
  }
  if (b_prime.rows != M() || b_prime.cols != 1) throw Error(ErrorCode::kShapeMismatch, "b_prime must be M x 1");
}

GemmOperands make_operands(const IntMatrix& w_int, const QuantParams& params_w, const IntMatrix& x_codes,
                           const QuantParams& params_x, IntMatrix b_hat) {
  if (w_int.cols != x_codes.rows) {
    throw Error(ErrorCode::kShapeMismatch, "W cols " + std::to_string(w_int.cols) + " != x rows " +
                                               std::to_string(x_codes.rows));
  }
  GemmOperands ops;
  ops.params_w = params_w;
  ops.params_x = params_x;
  ops.w = compress_operand(slice_sbr(w_int, params_w.bit_width), 0);
  const SlicedMatrix sx = slice_activation(x_codes, params_x);
  ops.x = compress_operand(sx, sx.has_ho_plane() ? static_cast<std::int8_t>(params_x.skip_value) : 0);
  if (b_hat.empty()) b_hat = IntMatrix(w_int.rows, 1);
  ops.b_hat = std::move(b_hat);
  const int l = sx.has_ho_plane() ? sx.ho().shift : 0;
  ops.b_prime = make_b_prime(w_int, sx.has_ho_plane() ? params_x.skip_value : 0, l);
  ops.validate();
  return ops;
}

IntMatrix effective_activation(const GemmOperands& ops) { return reconstruct(decompress_operand(ops.x)); }
IntMatrix weight_int(const GemmOperands& ops) { return reconstruct(decompress_operand(ops.w)); }

GemmResult aqs_gemm(const GemmOperands& ops, CompMode mode) {
  ops.validate();
  const std::size_t M = ops.M();
  const std::size_t K = ops.K();
  const std::size_t N = ops.N();
  const std::size_t MG = groups(M);
  const std::size_t NG = groups(N);

  const DecodedOperand w = decode(ops.w);
  const DecodedOperand x = decode(ops.x);

  GemmResult res;
  WorkloadCounters& c = res.workload;
  c.dram_nibbles = operand_nibbles(ops.w, MG * K) + operand_nibbles(ops.x, K * NG);
  c.dram_index_nibbles = (ops.w.ho ? ops.w.ho->record_count() : 0) + (ops.x.ho ? ops.x.ho->record_count() : 0);

  std::vector<std::int64_t> acc(M * N, 0);
  const auto& wp = w.planes.planes;
  const auto& xp = x.planes.planes;
  for (std::size_t iw = 0; iw < wp.size(); ++iw) {
    const bool w_ho = w.has_ho && iw == 0;
    for (std::size_t ix = 0; ix < xp.size(); ++ix) {
      const bool x_ho = x.has_ho && ix == 0;
      const auto pair = static_cast<std::size_t>(w_ho ? (x_ho ? PlanePair::kHoHo : PlanePair::kHoLo)
                                                      : (x_ho ? PlanePair::kLoHo : PlanePair::kLoLo));
      const std::int64_t weight = std::int64_t{1} << (wp[iw].shift + xp[ix].shift);
      const auto& pw = wp[iw].nibbles;
      const auto& px = xp[ix].nibbles;
      // Outer product per k: uncompressed 4x1 weight vector times 1x4 activation vector.
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t mg = 0; mg < MG; ++mg) {
          if (w_ho && w.stored[k * MG + mg] == 0) continue;
          const std::size_t m_end = std::min(M, (mg + 1) * kV);
          for (std::size_t ng = 0; ng < NG; ++ng) {
            if (x_ho && x.stored[k * NG + ng] == 0) continue;
            c.pair_mults[pair] += 16;
            const std::size_t n_end = std::min(N, (ng + 1) * kV);
            for (std::size_t m = mg * kV; m < m_end; ++m) {
              const std::int64_t a = std::int64_t{pw[m * K + k]} * weight;
              if (a == 0) continue;
              std::int64_t* row = acc.data() + m * N;
              const std::int8_t* xrow = px.data() + k * N;
              for (std::size_t n = ng * kV; n < n_end; ++n) row[n] += a * xrow[n];
            }
          }
        }
      }
    }
  }
  for (const auto pm : c.pair_mults) c.mults += pm;
  c.adds = c.mults;

  if (x.has_ho) {
    const IntMatrix w_int = reconstruct(w.planes);
    const auto comp = compensation(w_int, wp.size(), x.stored, N, ops.params_x.skip_value, xp.front().shift, mode,
                                   &ops.b_prime, &c);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += comp[i];
  }
  res.acc = narrow_matrix(M, N, acc, "accumulator");
  return res;
}

IntMatrix add_bias(const IntMatrix& acc, const IntMatrix& b_hat) {
  if (b_hat.empty()) return acc;
  if (b_hat.rows != acc.rows || b_hat.cols != 1) throw Error(ErrorCode::kShapeMismatch, "b_hat must be M x 1");
  IntMatrix out(acc.rows, acc.cols);
  for (std::size_t m = 0; m < acc.rows; ++m) {
    for (std::size_t n = 0; n < acc.cols; ++n) out(m, n) = narrow(std::int64_t{acc(m, n)} + b_hat(m, 0), "biased output");
  }
  return out;
}

IntMatrix dense_int_gemm_oracle(const IntMatrix& w_int, const IntMatrix& x_int, const IntMatrix& b_hat) {
  if (w_int.cols != x_int.rows) throw Error(ErrorCode::kShapeMismatch, "inner dimensions differ");
  if (!b_hat.empty() && (b_hat.rows != w_int.rows || b_hat.cols != 1)) {
    throw Error(ErrorCode::kShapeMismatch, "b_hat must be M x 1");
  }
  IntMatrix out(w_int.rows, x_int.cols);
  for (std::size_t m = 0; m < w_int.rows; ++m) {
    for (std::size_t n = 0; n < x_int.cols; ++n) {
      std::int64_t s = b_hat.empty() ? 0 : b_hat(m, 0);
      for (std::size_t k = 0; k < w_int.cols; ++k) s += std::int64_t{w_int(m, k)} * x_int(k, n);
      out(m, n) = narrow(s, "oracle output");
    }
  }
  return out;
}

IntMatrix compensation_term_eq5(const SlicedMatrix& w, std::span<const std::uint8_t> x_stored, std::size_t n_cols,
                                std::int32_t r, int l, WorkloadCounters* counters) {
  const auto v = compensation(reconstruct(w), w.planes.size(), x_stored, n_cols, r, l, CompMode::kEq5, nullptr,
                              counters);
  return narrow_matrix(w.rows, n_cols, v, "compensation");
}

IntMatrix compensation_term_eq6(const SlicedMatrix& w, std::span<const std::uint8_t> x_stored, std::size_t n_cols,
                                std::int32_t r, int l, const IntMatrix& b_prime, WorkloadCounters* counters) {
  const auto v = compensation(reconstruct(w), w.planes.size(), x_stored, n_cols, r, l, CompMode::kEq6, &b_prime,
                              counters);
  return narrow_matrix(w.rows, n_cols, v, "compensation");
}

IntMatrix requantize(const IntMatrix& acc, double s_w, double s_x, const QuantParams& next_params, PostOp post) {
  QuantParams wp;
  wp.scheme = QuantScheme::kSymmetric;
  wp.scale = s_w;
  return requantize(acc, wp, s_x, next_params, post);
}

IntMatrix requantize(const IntMatrix& acc, const QuantParams& w_params, double s_x, const QuantParams& next_params,
                     PostOp post) {
  if (next_params.scheme != QuantScheme::kAsymmetric) {
    throw Error(ErrorCode::kInvalidArgument, "next-layer params must be asymmetric");
  }
  next_params.validate();
  IntMatrix out(acc.rows, acc.cols);
  for (std::size_t m = 0; m < acc.rows; ++m) {
    const double s = w_params.scale_for_row(m) * s_x;
    for (std::size_t n = 0; n < acc.cols; ++n) {
      double y = s * acc(m, n);
      if (post == PostOp::kRelu) y = std::max(y, 0.0);
      const double q = round_half_even(y / next_params.scale) + next_params.zero_point;
      out(m, n) = static_cast<std::int32_t>(std::clamp(q, static_cast<double>(next_params.qmin()), static_cast<double>(next_params.qmax())));
    }
  }
  return out;
}

}  // namespace aqs
