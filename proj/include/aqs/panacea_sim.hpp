#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aqs/aqs_gemm.hpp"
#include "aqs/slice_compressor.hpp"
#include "aqs/workload.hpp"

namespace aqs {

enum class Arch : std::uint8_t { kPanacea, kSibia, kSimd, kSaWs, kSaOs };
enum class DtpMode : std::uint8_t { kAuto, kOff };

const char* to_string(Arch arch) noexcept;
Arch arch_from_string(const std::string& name);

// Per-event energies in pJ. The defaults are placeholders chosen to be
// plausible for a 28nm-class design; they are not measured values and only
// ratios between runs under one table are meaningful.
struct EnergyTable {
  double mult_4x4 = 0.05;
  double add_8b = 0.03;
  double sram_read_nibble = 0.25;
  double sram_write_nibble = 0.30;
  double dram_nibble = 20.0;
  double reg_op = 0.01;

  friend bool operator==(const EnergyTable&, const EnergyTable&) = default;
};

struct HardwareConfig {
  std::size_t P = 16;  // PEAs
  std::size_t v = 4;   // vector length
  std::size_t dwo_per_pea = 4;
  std::size_t swo_per_pea = 8;
  std::size_t multipliers_per_opc = 16;
  std::size_t TM = 64;
  std::size_t TK = 32;
  std::size_t TN = 64;
  std::size_t R = 16;
  std::size_t wmem_bytes = 64 * 1024;
  std::size_t amem_bytes = 64 * 1024;
  std::size_t omem_bytes = 64 * 1024;
  std::size_t wbuf_bytes = 256;  // per PEA
  std::size_t dram_bits_per_cycle = 256;
  std::size_t rle_run_bits = 4;
  DtpMode dtp = DtpMode::kAuto;
  CompMode comp_mode = CompMode::kEq6;
  double clock_ghz = 1.0;
  double static_power_mw = 0.0;
  EnergyTable energy;

  std::size_t multipliers() const noexcept { return P * (dwo_per_pea + swo_per_pea) * multipliers_per_opc; }
  // Dense baselines get the same silicon: one 8b x 8b MAC per four 4b x 4b multipliers.
  std::size_t baseline_macs_per_cycle() const noexcept { return multipliers() / 4; }
  std::size_t baseline_opcs() const noexcept { return multipliers() / multipliers_per_opc; }

  void validate() const;

  friend bool operator==(const HardwareConfig&, const HardwareConfig&) = default;
};

// Vector-level sparsity structure of one layer: everything the cycle model
// needs, extracted from real compressed operands or generated synthetically.
// Masks are indexed [k * groups + g] with 1 where the HO vector sits in a
// record (uncompressed or padding) and is therefore loaded and computed.
struct LayerPattern {
  std::string name;
  std::size_t M = 0;
  std::size_t K = 0;
  std::size_t N = 0;
  std::size_t w_planes = 2;  // including the HO plane
  std::size_t x_planes = 2;
  bool w_has_ho = true;
  bool x_has_ho = true;
  std::int32_t skip_value = 0;  // activation r; compensation vanishes when 0
  std::vector<std::uint8_t> w_stored;      // K x ceil(M/4)
  std::vector<std::uint8_t> x_stored;      // K x ceil(N/4)
  std::vector<std::uint8_t> x_zero_stored; // K x ceil(N/4): only all-zero HO vectors skipped
  double rho_w = 0.0;  // compressible fractions
  double rho_x = 0.0;
  double rho_x_zero = 0.0;

  std::size_t MG() const noexcept { return (M + 3) / 4; }
  std::size_t NG() const noexcept { return (N + 3) / 4; }
  void validate() const;
};

LayerPattern pattern_from_operands(const CompressedOperand& w, const CompressedOperand& x, std::string name = {});
LayerPattern pattern_from_operands(const GemmOperands& ops, std::string name = {});

// Seeded synthetic pattern: exactly round(rho * count) vectors of each operand
// are compressible, chosen by a seeded shuffle, so patterns for larger rho
// contain those for smaller rho at the same seed.
LayerPattern synthetic_pattern(std::size_t M, std::size_t K, std::size_t N, double rho_w, double rho_x,
                               std::uint64_t seed, std::int32_t skip_value = 10);

struct EnergyBreakdown {
  double compute_pj = 0.0;
  double sram_pj = 0.0;
  double dram_pj = 0.0;
  double register_pj = 0.0;
  double static_pj = 0.0;
  double total() const noexcept { return compute_pj + sram_pj + dram_pj + register_pj + static_pj; }
};

struct LayerReport {
  std::string layer;
  Arch arch = Arch::kPanacea;
  std::size_t M = 0;
  std::size_t K = 0;
  std::size_t N = 0;
  double rho_w = 0.0;
  double rho_x = 0.0;
  std::uint64_t cycles = 0;
  std::uint64_t compute_cycles = 0;  // summed compute demand, before overlap with transfers
  std::uint64_t compute_bound_groups = 0;
  std::uint64_t transfer_bound_groups = 0;
  std::uint64_t dwo_busy_cycles = 0;  // operator-cycles, summed over all DWOs
  std::uint64_t swo_busy_cycles = 0;
  std::uint64_t reg_nibbles = 0;      // WBUF / register reads
  bool dtp_enabled = false;
  bool compensation_overlapped = true;
  WorkloadCounters counters;
  EnergyBreakdown energy;
  double energy_pj = 0.0;
  double effective_tops = 0.0;
  double tops_per_watt_relative = 0.0;

  // Busy operator-cycles over available operator-cycles while computing.
  double dwo_utilization(const HardwareConfig& cfg) const noexcept;
  double swo_utilization(const HardwareConfig& cfg) const noexcept;
};

struct SimReport {
  HardwareConfig config;
  std::uint64_t seed = 0;
  std::vector<LayerReport> layers;
};

// Dispatches on arch. Panacea honours cfg.dtp; baselines ignore it.
LayerReport simulate_layer(const LayerPattern& layer, const HardwareConfig& cfg, Arch arch);
// Panacea with double-tile processing forced on where the capacity check allows it.
LayerReport simulate_dtp(const LayerPattern& layer, const HardwareConfig& cfg);
LayerReport simulate_baseline(const LayerPattern& layer, const HardwareConfig& cfg, Arch arch);

// True iff the compressed slices of a 2TM x K weight tile fit WMEM and two
// v x TK sub-tiles fit one PEA's WBUF (both inclusive).
bool dtp_enable_check(std::uint64_t pair_tile_nibbles, std::uint64_t max_subtile_pair_nibbles,
                      const HardwareConfig& cfg) noexcept;
bool dtp_enable_check(const LayerPattern& layer, const HardwareConfig& cfg);

EnergyBreakdown energy_of(const WorkloadCounters& c, std::uint64_t reg_nibbles, std::uint64_t cycles,
                          const HardwareConfig& cfg) noexcept;

// Workload table for a 4 x K by K x 4 product with two slices per operand.
// Values may be fractional for arbitrary rho.
struct ClosedForm {
  double mults = 0;
  double adds = 0;
  double dram_nibbles = 0;
  double compensation_mults = 0;
  double compensation_adds = 0;
  double compensation_dram_nibbles = 0;

  // Throws kInvalidArgument unless every entry is a whole number.
  WorkloadCounters to_counters() const;
};

ClosedForm closed_form_workloads(std::size_t K, double rho_w, double rho_x, Arch arch, CompMode mode);

struct SweepSpec {
  std::vector<double> rho_w{0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
  std::vector<double> rho_x{0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
  struct Size {
    std::size_t M, K, N;
  };
  std::vector<Size> sizes{{512, 512, 512}};
  std::vector<Arch> archs{Arch::kPanacea, Arch::kSibia, Arch::kSimd, Arch::kSaWs, Arch::kSaOs};
  // Named config variants; empty means the base config only.
  std::vector<std::pair<std::string, HardwareConfig>> variants;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SweepRow {
  std::string variant;
  LayerReport report;
};

std::vector<SweepRow> sweep(const SweepSpec& spec, const HardwareConfig& base);

}  // namespace aqs
