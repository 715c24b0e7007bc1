#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aqs/matrix.hpp"
#include "aqs/quantizer.hpp"
#include "aqs/slice_compressor.hpp"
#include "aqs/workload.hpp"

namespace aqs {

enum class CompMode : std::uint8_t { kEq5 = 5, kEq6 = 6 };

const char* to_string(CompMode mode) noexcept;

// Compressed weight (M x K, SBR) and activation (K x N) operands plus the
// folded bias b_hat and the offline compensation constant
// b_prime = r * 2^l * rowsum(W_int), both M x 1.
struct GemmOperands {
  CompressedOperand w;
  CompressedOperand x;
  QuantParams params_w;
  QuantParams params_x;
  IntMatrix b_hat;
  IntMatrix b_prime;

  std::size_t M() const noexcept { return w.rows; }
  std::size_t K() const noexcept { return w.cols; }
  std::size_t N() const noexcept { return x.cols; }

  // Throws kShapeMismatch / kInvalidArgument when the pieces disagree.
  void validate() const;
};

// Slices, compresses and packages integer operands. x must hold codes of an
// asymmetric params_x (after any ZPM/DBS); an empty b_hat means zero bias.
GemmOperands make_operands(const IntMatrix& w_int, const QuantParams& params_w, const IntMatrix& x_codes,
                           const QuantParams& params_x, IntMatrix b_hat = {});

// r * 2^l * rowsum(W_int) as an M x 1 column.
IntMatrix make_b_prime(const IntMatrix& w_int, std::int32_t r, int l);

struct GemmResult {
  IntMatrix acc;  // excludes b_hat
  WorkloadCounters workload;
};

GemmResult aqs_gemm(const GemmOperands& ops, CompMode mode);

// acc + b_hat broadcast along columns, checked against int32.
IntMatrix add_bias(const IntMatrix& acc, const IntMatrix& b_hat);

// Plain triple loop plus b_hat; the reference for every equivalence check.
IntMatrix dense_int_gemm_oracle(const IntMatrix& w_int, const IntMatrix& x_int, const IntMatrix& b_hat = {});

// The activation operand as the engine sees it (DBS truncation included).
IntMatrix effective_activation(const GemmOperands& ops);
IntMatrix weight_int(const GemmOperands& ops);

// Compensation for column groups of 4, given the per-(k, column group)
// stored-vector flags of the activation HO plane (1 = uncompressed).
//   eq5:  r * 2^l * sum_{k in C(n)} W_int[m, k]
//   eq6:  b_prime[m] - r * 2^l * sum_{k in U(n)} W_int[m, k]
// Counts 16 multiplications per 4x4 output tile and 4 additions per weight
// plane for every k accumulated.
IntMatrix compensation_term_eq5(const SlicedMatrix& w, std::span<const std::uint8_t> x_stored, std::size_t n_cols,
                                std::int32_t r, int l, WorkloadCounters* counters = nullptr);
IntMatrix compensation_term_eq6(const SlicedMatrix& w, std::span<const std::uint8_t> x_stored, std::size_t n_cols,
                                std::int32_t r, int l, const IntMatrix& b_prime,
                                WorkloadCounters* counters = nullptr);

enum class PostOp : std::uint8_t { kIdentity, kRelu };

// y = s_w * s_x * acc, optionally rectified, quantized with next_params.
IntMatrix requantize(const IntMatrix& acc, double s_w, double s_x, const QuantParams& next_params,
                     PostOp post = PostOp::kIdentity);
// Per-row weight scales taken from w_params.
IntMatrix requantize(const IntMatrix& acc, const QuantParams& w_params, double s_x, const QuantParams& next_params,
                     PostOp post = PostOp::kIdentity);

}  // namespace aqs
