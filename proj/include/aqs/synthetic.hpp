#pragma once

#include <cstdint>

#include "aqs/matrix.hpp"
#include "aqs/quantizer.hpp"

namespace aqs {

// Seeded integer GEMM operands with controlled HO-vector sparsity: each 4x1
// weight vector has a zero SBR HO slice with probability rho_w, and each 1x4
// activation vector lies entirely in the skip range with probability rho_x.
// Activation params carry a seeded zero point after ZPM for dbs_type.
struct SyntheticGemm {
  IntMatrix w;
  QuantParams params_w;
  IntMatrix x;
  QuantParams params_x;
};

SyntheticGemm synthetic_gemm(std::uint64_t seed, std::size_t M, std::size_t K, std::size_t N, double rho_w,
                             double rho_x, int weight_bits = 7, int dbs_type = 1);

}  // namespace aqs
