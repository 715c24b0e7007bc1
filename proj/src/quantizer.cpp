#include "aqs/quantizer.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <numeric>

namespace aqs {
namespace {

void check_bits(int bits) {
  if (bits < 2 || bits > 16) throw Error(ErrorCode::kInvalidArgument, "bit-width must be in [2, 16]");
}

void check_finite_nonempty(const FloatMatrix& x) {
  if (x.empty()) throw Error(ErrorCode::kInvalidArgument, "empty input");
  for (float v : x.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite input value");
  }
}

std::int32_t clip(double v, std::int32_t lo, std::int32_t hi) {
  return static_cast<std::int32_t>(std::clamp(v, static_cast<double>(lo), static_cast<double>(hi)));
}

std::int32_t lo_mask_half(int l) { return 1 << (l - 1); }

}  // namespace

std::int32_t QuantParams::qmin() const noexcept {
  return scheme == QuantScheme::kSymmetric ? -(1 << (bit_width - 1)) : 0;
}

std::int32_t QuantParams::qmax() const noexcept {
  return scheme == QuantScheme::kSymmetric ? (1 << (bit_width - 1)) - 1 : (1 << bit_width) - 1;
}

double QuantParams::scale_for_row(std::size_t row) const {
  if (group_scales.empty()) return scale;
  const std::size_t g = row / group_size;
  if (g >= group_scales.size()) throw Error(ErrorCode::kOutOfRange, "row beyond scale groups");
  return group_scales[g];
}

void QuantParams::validate() const {
  check_bits(bit_width);
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::kInvalidArgument, "scale must be positive");
  if (scheme == QuantScheme::kSymmetric && zero_point != 0) {
    throw Error(ErrorCode::kInvalidArgument, "symmetric params must have zero_point 0");
  }
  if (zero_point < 0 || zero_point > (1 << bit_width) - 1) {
    throw Error(ErrorCode::kInvalidArgument, "zero_point outside the unsigned range");
  }
  if (lo_width < 4 || lo_width > 6 || dbs_type != lo_width - 3) {
    throw Error(ErrorCode::kInvalidArgument, "dbs_type 1/2/3 must pair with lo_width 4/5/6");
  }
  if (skip_value < 0 || skip_value > 15) throw Error(ErrorCode::kInvalidArgument, "skip_value must be a nibble");
  if (!group_scales.empty() && group_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "group_scales given without group_size");
  }
}

double round_half_even(double v) noexcept {
  const double f = std::floor(v);
  const double d = v - f;
  if (d < 0.5) return f;
  if (d > 0.5) return f + 1.0;
  return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

Quantized quantize_symmetric(const FloatMatrix& x, int bits, std::size_t group_rows) {
  check_bits(bits);
  check_finite_nonempty(x);
  Quantized out{IntMatrix(x.rows, x.cols), {}};
  auto& p = out.params;
  p.scheme = QuantScheme::kSymmetric;
  p.bit_width = bits;
  p.zero_point = 0;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const std::size_t group = group_rows == 0 ? x.rows : group_rows;

  for (std::size_t g0 = 0; g0 < x.rows; g0 += group) {
    const std::size_t g1 = std::min(x.rows, g0 + group);
    double max_abs = 0.0;
    for (std::size_t i = g0 * x.cols; i < g1 * x.cols; ++i) max_abs = std::max(max_abs, std::fabs(double{x.data[i]}));
    const double scale = max_abs == 0.0 ? 1.0 : 2.0 * max_abs / levels;
    for (std::size_t i = g0 * x.cols; i < g1 * x.cols; ++i) {
      // x / s evaluated as x * levels / (2 max|x|) so exact ties stay exact.
      const double ratio = max_abs == 0.0 ? 0.0 : double{x.data[i]} * levels / (2.0 * max_abs);
      out.codes.data[i] = clip(round_half_even(ratio), p.qmin(), p.qmax());
    }
    if (group_rows != 0) p.group_scales.push_back(scale);
    if (g0 == 0) p.scale = scale;
  }
  if (group_rows != 0) p.group_size = group_rows;
  return out;
}

QuantParams fit_asymmetric(double min, double max, int bits) {
  check_bits(bits);
  QuantParams p;
  p.scheme = QuantScheme::kAsymmetric;
  p.bit_width = bits;
  if (!(max > min)) {
    p.scale = 1.0;
    p.zero_point = 0;
    return p;
  }
  const double levels = std::ldexp(1.0, bits) - 1.0;
  p.scale = (max - min) / levels;
  p.zero_point = clip(round_half_even(-min * levels / (max - min)), 0, p.qmax());
  return p;
}

Quantized quantize_asymmetric(const FloatMatrix& x, int bits, const std::optional<QuantParams>& params) {
  check_finite_nonempty(x);
  Quantized out{IntMatrix(x.rows, x.cols), {}};
  if (params) {
    if (params->scheme != QuantScheme::kAsymmetric) {
      throw Error(ErrorCode::kInvalidArgument, "supplied params are not asymmetric");
    }
    params->validate();
    out.params = *params;
    const auto& p = out.params;
    for (std::size_t i = 0; i < x.size(); ++i) {
      out.codes.data[i] = clip(round_half_even(double{x.data[i]} / p.scale) + p.zero_point, 0, p.qmax());
    }
    return out;
  }

  const auto [mn, mx] = std::minmax_element(x.data.begin(), x.data.end());
  out.params = fit_asymmetric(*mn, *mx, bits);
  const auto& p = out.params;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const double range = double{*mx} - double{*mn};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ratio = range > 0.0 ? double{x.data[i]} * levels / range : double{x.data[i]};
    out.codes.data[i] = clip(round_half_even(ratio) + p.zero_point, 0, p.qmax());
  }
  return out;
}

FloatMatrix dequantize(const IntMatrix& q, const QuantParams& p) {
  FloatMatrix out(q.rows, q.cols);
  for (std::size_t r = 0; r < q.rows; ++r) {
    const double s = p.scale_for_row(r);
    for (std::size_t c = 0; c < q.cols; ++c) {
      out(r, c) = static_cast<float>(s * (q(r, c) - p.zero_point));
    }
  }
  return out;
}

IntMatrix fold_bias(const IntMatrix& w_int, std::int32_t zp_x, const FloatMatrix& bias, double s_w, double s_x) {
  QuantParams wp;
  wp.scheme = QuantScheme::kSymmetric;
  wp.scale = s_w;
  QuantParams xp;
  xp.scale = s_x;
  xp.zero_point = zp_x;
  xp.bit_width = 16;
  return fold_bias(w_int, wp, xp, bias);
}

IntMatrix fold_bias(const IntMatrix& w_int, const QuantParams& w_params, const QuantParams& x_params,
                    const FloatMatrix& bias) {
  if (bias.rows != w_int.rows || bias.cols != 1) {
    throw Error(ErrorCode::kShapeMismatch, "bias must be " + std::to_string(w_int.rows) + "x1");
  }
  IntMatrix out(w_int.rows, 1);
  for (std::size_t m = 0; m < w_int.rows; ++m) {
    std::int64_t row_sum = 0;
    for (auto v : w_int.row(m)) row_sum += v;
    const double denom = w_params.scale_for_row(m) * x_params.scale;
    const double b_int = round_half_even(double{bias(m, 0)} / denom);
    if (std::fabs(b_int) > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
      throw Error(ErrorCode::kOverflow, "folded bias exceeds int32 at row " + std::to_string(m));
    }
    const std::int64_t v = static_cast<std::int64_t>(b_int) - std::int64_t{x_params.zero_point} * row_sum;
    if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max()) {
      throw Error(ErrorCode::kOverflow, "folded bias exceeds int32 at row " + std::to_string(m));
    }
    out(m, 0) = static_cast<std::int32_t>(v);
  }
  return out;
}

QuantParams zpm_adjust(const QuantParams& params) {
  if (params.scheme != QuantScheme::kAsymmetric) {
    throw Error(ErrorCode::kInvalidArgument, "zero-point manipulation needs asymmetric params");
  }
  QuantParams p = params;
  const int l = p.lo_width;
  if (p.zero_point > 0) {
    p.zero_point = (1 << l) * (p.zero_point >> l) + lo_mask_half(l);
    p.skip_value = (p.zero_point - lo_mask_half(l)) >> l;
  } else {
    p.zero_point = 0;
    p.skip_value = 0;
  }
  return p;
}

double CalibStats::mean() const noexcept {
  if (count == 0) return 0.0;
  double s = 0.0;
  for (std::size_t c = 0; c < histogram.size(); ++c) s += static_cast<double>(c) * histogram[c];
  return s / static_cast<double>(count);
}

double CalibStats::std() const noexcept {
  if (count == 0) return 0.0;
  const double mu = mean();
  double s = 0.0;
  for (std::size_t c = 0; c < histogram.size(); ++c) {
    const double d = static_cast<double>(c) - mu;
    s += d * d * histogram[c];
  }
  return std::sqrt(s / static_cast<double>(count));
}

CalibStats& CalibStats::merge(const CalibStats& other) {
  if (other.count == 0) return *this;
  if (count == 0) return *this = other;
  if (other.hist_zero_point != hist_zero_point || other.bit_width != bit_width) {
    throw Error(ErrorCode::kInvalidArgument, "cannot merge histograms quantized with different params");
  }
  min = std::min(min, other.min);
  max = std::max(max, other.max);
  for (std::size_t i = 0; i < histogram.size(); ++i) histogram[i] += other.histogram[i];
  count += other.count;
  return *this;
}

CalibStats CalibStats::from_codes(const IntMatrix& codes, float min, float max, const QuantParams& p) {
  if (p.bit_width > 8) throw Error(ErrorCode::kInvalidArgument, "histogram supports bit-widths up to 8");
  CalibStats s;
  s.min = min;
  s.max = max;
  s.hist_zero_point = p.zero_point;
  s.bit_width = p.bit_width;
  for (auto c : codes.data) {
    if (c < 0 || c > p.qmax()) throw Error(ErrorCode::kOutOfRange, "code outside quantized range");
    ++s.histogram[static_cast<std::size_t>(c)];
  }
  s.count = codes.size();
  return s;
}

double skip_range_mass(const CalibStats& stats, const QuantParams& p) {
  if (stats.count == 0) return 0.0;
  const std::int32_t qmax = (1 << stats.bit_width) - 1;
  std::uint64_t hit = 0;
  for (std::int32_t c = 0; c <= qmax; ++c) {
    const auto shifted = std::clamp(c - stats.hist_zero_point + p.zero_point, 0, qmax);
    if ((shifted >> p.lo_width) == p.skip_value) hit += stats.histogram[static_cast<std::size_t>(c)];
  }
  return static_cast<double>(hit) / static_cast<double>(stats.count);
}

double DbsPolicy::z_score() const {
  if (!(target_sparsity > 0.0 && target_sparsity < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target sparsity must be in (0, 1)");
  }
  return std::sqrt(2.0) * boost::math::erf_inv(target_sparsity);
}

DbsChoice dbs_classify(const CalibStats& stats, const DbsPolicy& policy) {
  const double sd = stats.std();
  if (sd == 0.0) return {1, 4};
  const double spread = sd * policy.z_score();
  for (int i = 0; i < 3; ++i) {
    if (spread <= policy.half_widths[static_cast<std::size_t>(i)]) return {i + 1, i + 4};
  }
  return {3, 6};
}

CalibrationResult calibrate(std::span<const FloatMatrix> batches, const CalibrationOptions& options) {
  if (batches.empty()) throw Error(ErrorCode::kInvalidArgument, "calibration needs at least one batch");
  if (options.bits != 8) throw Error(ErrorCode::kInvalidArgument, "activation calibration supports 8-bit codes");

  float mn = std::numeric_limits<float>::infinity();
  float mx = -std::numeric_limits<float>::infinity();
  for (const auto& b : batches) {
    check_finite_nonempty(b);
    const auto [lo, hi] = std::minmax_element(b.data.begin(), b.data.end());
    mn = std::min(mn, *lo);
    mx = std::max(mx, *hi);
  }

  CalibrationResult result;
  QuantParams fitted = fit_asymmetric(mn, mx, options.bits);
  for (const auto& b : batches) {
    const auto q = quantize_asymmetric(b, options.bits, fitted);
    result.stats.merge(CalibStats::from_codes(q.codes, mn, mx, fitted));
  }

  const DbsChoice choice = options.enable_dbs ? dbs_classify(result.stats, options.dbs) : DbsChoice{};
  fitted.lo_width = choice.lo_width;
  fitted.dbs_type = choice.type;
  fitted.skip_value = fitted.zero_point >> fitted.lo_width;

  result.params = options.enable_zpm ? zpm_adjust(fitted) : fitted;
  result.skip_mass = skip_range_mass(result.stats, result.params);
  result.skip_mass_without_zpm = skip_range_mass(result.stats, fitted);
  return result;
}

}  // namespace aqs
