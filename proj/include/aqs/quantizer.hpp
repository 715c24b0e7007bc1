#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aqs/matrix.hpp"

namespace aqs {

enum class QuantScheme : std::uint8_t { kSymmetric, kAsymmetric };

struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
  int bit_width = 8;
  QuantScheme scheme = QuantScheme::kAsymmetric;
  int dbs_type = 1;
  int lo_width = 4;
  // HO pattern shared by every code inside the skip range.
  std::int32_t skip_value = 0;
  // Optional weight-side grouping: consecutive rows (output channels) of
  // `group_size` share one scale. Empty means a single per-tensor scale.
  std::size_t group_size = 0;
  std::vector<double> group_scales;

  std::int32_t qmin() const noexcept;
  std::int32_t qmax() const noexcept;
  double scale_for_row(std::size_t row) const;
  void validate() const;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

struct Quantized {
  IntMatrix codes;
  QuantParams params;
};

// Round half to even; all float->int rounding in the library goes through this.
double round_half_even(double v) noexcept;

Quantized quantize_symmetric(const FloatMatrix& x, int bits, std::size_t group_rows = 0);

// Without params the scale and zero point are fitted to min/max of x.
// With params (calibrated inference reuse) its scale/zero point are used unchanged.
Quantized quantize_asymmetric(const FloatMatrix& x, int bits, const std::optional<QuantParams>& params = std::nullopt);

// Scale and zero point fitted to [min, max] for a `bits`-wide unsigned range.
QuantParams fit_asymmetric(double min, double max, int bits);

FloatMatrix dequantize(const IntMatrix& q, const QuantParams& p);

// b_hat = round(b / (s_w * s_x)) - zp_x * rowsum(W_int), checked against int32.
IntMatrix fold_bias(const IntMatrix& w_int, std::int32_t zp_x, const FloatMatrix& bias, double s_w, double s_x);
IntMatrix fold_bias(const IntMatrix& w_int, const QuantParams& w_params, const QuantParams& x_params,
                    const FloatMatrix& bias);

// Zero-point manipulation: moves zp to the center of its 2^l-wide HO bucket
// and sets the matching skip value. Scale is untouched.
QuantParams zpm_adjust(const QuantParams& params);

// Activation statistics gathered during calibration. min/max are observed
// float extremes; the histogram counts quantized codes (produced with
// `hist_zero_point`), one bin per code for bit-widths up to 8.
struct CalibStats {
  float min = 0.0f;
  float max = 0.0f;
  std::array<std::uint64_t, 256> histogram{};
  std::uint64_t count = 0;
  std::int32_t hist_zero_point = 0;
  int bit_width = 8;

  double mean() const noexcept;
  double std() const noexcept;

  // Associative and commutative; batches may be accumulated independently.
  CalibStats& merge(const CalibStats& other);

  static CalibStats from_codes(const IntMatrix& codes, float min, float max, const QuantParams& p);
};

// Fraction of the distribution that would land in the skip range of `p`
// (codes whose HO slice equals p.skip_value once shifted to p's zero point).
double skip_range_mass(const CalibStats& stats, const QuantParams& p);

// Three-way threshold rule: std * z* is compared against the skip-range
// half-widths of l = 4, 5, 6. z* is the two-sided standard-normal quantile of
// the target sparsity. These thresholds are a reconstruction and are configurable.
struct DbsPolicy {
  double target_sparsity = 0.9;
  std::array<double, 3> half_widths{8.0, 16.0, 32.0};

  double z_score() const;
};

struct DbsChoice {
  int type = 1;
  int lo_width = 4;
  friend bool operator==(const DbsChoice&, const DbsChoice&) = default;
};

DbsChoice dbs_classify(const CalibStats& stats, const DbsPolicy& policy = {});

struct CalibrationOptions {
  int bits = 8;
  DbsPolicy dbs;
  bool enable_zpm = true;
  bool enable_dbs = true;
};

struct CalibrationResult {
  QuantParams params;
  CalibStats stats;
  double skip_mass = 0.0;              // with the returned params
  double skip_mass_without_zpm = 0.0;  // same l, zero point left as fitted
};

CalibrationResult calibrate(std::span<const FloatMatrix> batches, const CalibrationOptions& options = {});

}  // namespace aqs
