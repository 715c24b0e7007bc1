#include "aqs/synthetic.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "aqs/error.hpp"

namespace aqs {

SyntheticGemm synthetic_gemm(std::uint64_t seed, std::size_t M, std::size_t K, std::size_t N, double rho_w,
                             double rho_x, int weight_bits, int dbs_type) {
  if (!(rho_w >= 0 && rho_w <= 1 && rho_x >= 0 && rho_x <= 1)) {
    throw Error(ErrorCode::kOutOfRange, "sparsity must lie in [0, 1]");
  }
  if (weight_bits != 4 && weight_bits != 7 && weight_bits != 10) {
    throw Error(ErrorCode::kInvalidArgument, "weight bits must be 4, 7 or 10, got " + std::to_string(weight_bits));
  }
  if (dbs_type < 1 || dbs_type > 3) throw Error(ErrorCode::kInvalidArgument, "dbs_type must be 1, 2 or 3");
  if (M == 0 || K == 0 || N == 0) throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");

  std::mt19937_64 rng(seed);
  SyntheticGemm g;
  g.params_w.scheme = QuantScheme::kSymmetric;
  g.params_w.bit_width = weight_bits;
  g.params_w.scale = 1.0 / 64;

  const int l = dbs_type + 3;
  g.params_x.scale = 1.0 / 32;
  g.params_x.zero_point = std::uniform_int_distribution<std::int32_t>(1, 255)(rng);
  g.params_x.lo_width = l;
  g.params_x.dbs_type = dbs_type;
  g.params_x = zpm_adjust(g.params_x);

  std::bernoulli_distribution w_sparse(rho_w);
  std::bernoulli_distribution x_sparse(rho_x);
  const std::int32_t full = 1 << (weight_bits - 1);
  // SBR maps [-2^(bits-4), 2^(bits-4) - 1] to a zero HO slice; 4-bit weights have no HO slice.
  const std::int32_t near = weight_bits == 4 ? full : 1 << (weight_bits - 4);
  std::uniform_int_distribution<std::int32_t> w_full(-full, full - 1);
  std::uniform_int_distribution<std::int32_t> w_near(-near, near - 1);
  g.w = IntMatrix(M, K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m0 = 0; m0 < M; m0 += 4) {
      const bool sparse = w_sparse(rng);
      for (std::size_t m = m0; m < std::min(M, m0 + 4); ++m) g.w(m, k) = sparse ? w_near(rng) : w_full(rng);
    }
  }
  const std::int32_t lo = g.params_x.skip_value << l;
  std::uniform_int_distribution<std::int32_t> x_in(lo, lo + (1 << l) - 1);
  std::uniform_int_distribution<std::int32_t> x_any(0, 255);
  g.x = IntMatrix(K, N);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n0 = 0; n0 < N; n0 += 4) {
      const bool sparse = x_sparse(rng);
      for (std::size_t n = n0; n < std::min(N, n0 + 4); ++n) g.x(k, n) = sparse ? x_in(rng) : x_any(rng);
    }
  }
  return g;
}

}  // namespace aqs
