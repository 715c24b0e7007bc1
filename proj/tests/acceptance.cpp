// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "aqs/aqs_gemm.hpp"
#include "aqs/bit_slicer.hpp"
#include "aqs/panacea_sim.hpp"
#include "aqs/quantizer.hpp"
#include "aqs/slice_compressor.hpp"
#include "aqs/tensor_io.hpp"
#include "cli_util.hpp"
#include "test_util.hpp"

using namespace aqs;

namespace {

// Tolerances and budgets.
constexpr double kExactnessBudgetSeconds = 60.0;
constexpr double kDtpTarget = 1.11;
constexpr double kDtpTolerance = 0.05;
constexpr double kZpmMassWithoutMax = 0.8;  // exclusive
constexpr double kZpmMassWithMin = 0.95;

// Collects the first few failure messages of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    if (failures_++ < 5) notes_ << "\n    " << what;
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::ostringstream s;
    s << checks_ << " checks, " << failures_ << " failed" << notes_.str();
    return s.str();
  }
  std::ostringstream& note() { return extra_; }
  std::string extra() const { return extra_.str(); }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::ostringstream notes_;
  std::ostringstream extra_;
};

GemmOperands ops_of(const test::GemmCase& c) { return make_operands(c.w, c.params_w, c.x, c.params_x); }

IntMatrix row_of(std::int32_t lo, std::int32_t hi) {
  IntMatrix m(1, static_cast<std::size_t>(hi - lo + 1));
  for (std::int32_t v = lo; v <= hi; ++v) m.data[static_cast<std::size_t>(v - lo)] = v;
  return m;
}

bool same_compute(const WorkloadCounters& a, const WorkloadCounters& b) {
  return a.mults == b.mults && a.adds == b.adds && a.pair_mults == b.pair_mults &&
         a.compensation_mults == b.compensation_mults && a.compensation_adds == b.compensation_adds &&
         a.compensation_dram_nibbles == b.compensation_dram_nibbles;
}

bool equals_closed_form(const WorkloadCounters& c, const ClosedForm& cf, double scale, bool with_compute) {
  auto eq = [&](std::uint64_t v, double f) { return static_cast<double>(v) == scale * f; };
  const bool loads = eq(c.dram_nibbles, cf.dram_nibbles) && eq(c.compensation_mults, cf.compensation_mults) &&
                     eq(c.compensation_adds, cf.compensation_adds) &&
                     eq(c.compensation_dram_nibbles, cf.compensation_dram_nibbles);
  return loads && (!with_compute || (eq(c.mults, cf.mults) && eq(c.adds, cf.adds)));
}

// Nibbles held by a compressed operand: LO planes plus stored HO vectors.
std::uint64_t stored_nibbles(const CompressedOperand& op) {
  std::uint64_t n = 0;
  for (const auto& p : op.lo_planes) n += p.nibbles.size();
  if (op.ho) n += 4 * op.ho->record_count();
  return n;
}

void exactness(Check& c) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> dim(1, 128);
  const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 1000; ++t) {
    const int n = t % 3;
    const int type = 1 + (t / 3) % 3;
    const double rw = grid[(t / 9) % 5];
    const double rx = grid[(t / 45) % 5];
    const auto gc = test::random_gemm_case(rng, n, type, rw, rx, dim(rng), dim(rng), dim(rng));
    const auto ops = ops_of(gc);
    const auto oracle = dense_int_gemm_oracle(gc.w, effective_activation(ops));
    const auto r5 = aqs_gemm(ops, CompMode::kEq5).acc;
    const auto r6 = aqs_gemm(ops, CompMode::kEq6).acc;
    c.expect(r5 == oracle && r6 == oracle, "case " + std::to_string(t) + " differs from the oracle");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < kExactnessBudgetSeconds, "runtime " + std::to_string(secs) + " s");
  c.note() << ", " << secs << " s";
}

void slicing(Check& c) {
  for (int bits : {7, 10}) {
    const auto all = row_of(-(1 << (bits - 1)), (1 << (bits - 1)) - 1);
    c.expect(reconstruct(slice_sbr(all, bits)) == all, "SBR " + std::to_string(bits) + "-bit");
  }
  const auto codes = row_of(0, 255);
  for (int l = 4; l <= 6; ++l) {
    QuantParams p;
    p.lo_width = l;
    p.dbs_type = l - 3;
    const auto back = reconstruct(slice_activation(codes, p));
    for (int v = 0; v < 256; ++v) {
      const int err = std::abs(v - back.data[static_cast<std::size_t>(v)]);
      if (l == 4) {
        c.expect(err == 0, "straight slicing of " + std::to_string(v));
      } else {
        c.expect(err < (1 << (l - 4)), "DBS l=" + std::to_string(l) + " v=" + std::to_string(v));
      }
    }
  }
}

void workload_table(Check& c) {
  for (std::size_t K : {8u, 32u, 128u}) {
    const auto Kd = static_cast<double>(K);
    for (std::size_t cw = 0; cw <= K; cw += K / 8) {
      for (std::size_t cx = 0; cx <= K; cx += K / 8) {
        const double rw = static_cast<double>(cw) / Kd;
        const double rx = static_cast<double>(cx) / Kd;
        const std::string at = "K=" + std::to_string(K) + " rho=(" + std::to_string(rw) + "," + std::to_string(rx) + ")";
        for (const CompMode mode : {CompMode::kEq5, CompMode::kEq6}) {
          HardwareConfig cfg;
          cfg.comp_mode = mode;
          const auto cf = closed_form_workloads(K, rw, rx, Arch::kPanacea, mode);
          const double comp_ema = mode == CompMode::kEq5 ? 8 * Kd * rx : 0.0;
          c.expect(cf.compensation_dram_nibbles == comp_ema, at + " closed-form compensation EMA");

          // One unit: loads and compensation are exact for any placement.
          const auto unit = ops_of(test::unit_case(test::sparse_tail(K, cw), test::interleaved(K, cx)));
          const LayerPattern L = pattern_from_operands(unit);
          c.expect(L.rho_w == rw && L.rho_x == rx, at + " realized rho");
          const auto eng = aqs_gemm(unit, mode).workload;
          const auto sim = simulate_layer(L, cfg, Arch::kPanacea).counters;
          c.expect(equals_closed_form(eng, cf, 1.0, false), at + " engine unit");
          c.expect(equals_closed_form(sim, cf, 1.0, false), at + " simulator unit");
          c.expect(static_cast<double>(sim.compensation_dram_nibbles) == comp_ema, at + " compensation EMA");

          // Multiply and add counts depend on how the masks overlap; over all
          // K rotations every pairing occurs once and the sum is K times the table.
          WorkloadCounters eng_sum, sim_sum;
          for (const auto& u : test::rotation_units(test::sparse_tail(K, cw), test::interleaved(K, cx))) {
            const auto ops = ops_of(u);
            eng_sum += aqs_gemm(ops, mode).workload;
            sim_sum += simulate_layer(pattern_from_operands(ops), cfg, Arch::kPanacea).counters;
          }
          c.expect(equals_closed_form(eng_sum, cf, Kd, true), at + " engine ensemble");
          c.expect(equals_closed_form(sim_sum, cf, Kd, true), at + " simulator ensemble");
        }
      }
    }
  }
}

void zpm(Check& c) {
  for (int l = 4; l <= 6; ++l) {
    for (int zp = 1; zp <= 255; ++zp) {
      QuantParams p;
      p.zero_point = zp;
      p.lo_width = l;
      p.dbs_type = l - 3;
      const auto adj = zpm_adjust(p);
      const int half = 1 << (l - 1);
      const std::string at = "l=" + std::to_string(l) + " zp=" + std::to_string(zp);
      c.expect(adj.zero_point % (1 << l) == half, at + " centre");
      int lo = 256, hi = -1;
      for (int v = 0; v < 256; ++v) {
        if ((v >> l) == adj.skip_value) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      c.expect(hi - lo + 1 == (1 << l) && lo + half == adj.zero_point, at + " skip interval");
    }
  }
  std::mt19937_64 rng(7);
  const auto res = calibrate(std::vector<FloatMatrix>{test::centred_batch(rng, 6.0, 161)});
  c.expect(res.skip_mass_without_zpm < kZpmMassWithoutMax, "mass without ZPM " + std::to_string(res.skip_mass_without_zpm));
  c.expect(res.skip_mass >= kZpmMassWithMin, "mass with ZPM " + std::to_string(res.skip_mass));
  c.note() << ", skip mass " << res.skip_mass_without_zpm << " -> " << res.skip_mass << " (l=" << res.params.lo_width
           << ")";
}

void rle(Check& c) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  std::uniform_real_distribution<double> rho_d(0.0, 1.0);
  const std::size_t forced_runs[] = {0, 15, 16, 31};
  for (int t = 0; t < 10000; ++t) {
    const bool weights = t % 2 == 0;
    const auto o = weights ? Orientation::kWeight4x1 : Orientation::kActivation1x4;
    const std::int8_t r = weights ? 0 : static_cast<std::int8_t>(t % 16);
    const double rho = t % 10 == 0 ? 1.0 : t % 10 == 1 ? 0.0 : rho_d(rng);
    std::size_t rows = dim(rng), cols = dim(rng);
    // Every fourth plane opens each stream with a boundary-length run.
    const bool forced = t % 4 == 3;
    const std::size_t run = forced_runs[(t / 4) % 4];
    if (forced) (weights ? rows : cols) = 4 * (run + 1) + dim(rng) % 8;
    const std::size_t streams = weights ? cols : rows;
    const std::size_t axis = weights ? rows : cols;

    SlicePlane p{rows, cols, std::vector<std::int8_t>(rows * cols, r), weights, weights ? 3 : 4};
    std::bernoulli_distribution skip(rho);
    std::uniform_int_distribution<int> other(1, 15);  // offset from r, never 0
    for (std::size_t s = 0; s < streams; ++s) {
      for (std::size_t v = 0; v * 4 < axis; ++v) {
        const bool stored = forced && v <= run ? v == run : !skip(rng);
        if (!stored) continue;
        const std::size_t at = v * 4 + static_cast<std::size_t>(other(rng)) % std::min<std::size_t>(4, axis - v * 4);
        const int code = weights ? ((r + other(rng) + 8) % 16) - 8 : (r + other(rng)) % 16;
        p.nibbles[weights ? at * cols + s : s * cols + at] = static_cast<std::int8_t>(code);
      }
    }
    const auto cp = compress_plane(p, o, r);
    c.expect(decompress_plane(cp) == p, "plane " + std::to_string(t));
    c.expect(decode_compressed(encode_compressed(cp)) == cp, "bytes " + std::to_string(t));
  }
}

void simulator_trends(Check& c) {
  const HardwareConfig cfg;
  SweepSpec spec;
  spec.archs = {Arch::kPanacea, Arch::kSimd};
  const auto rows = sweep(spec, cfg);
  const std::size_t g = spec.rho_x.size();
  auto at = [&](std::size_t i, std::size_t j, std::size_t a) -> const LayerReport& {
    return rows[(i * g + j) * spec.archs.size() + a].report;
  };
  // (a)
  for (std::size_t i = 0; i < spec.rho_w.size(); ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      if (j > 0) c.expect(at(i, j, 0).cycles <= at(i, j - 1, 0).cycles, "(a) monotone in rho_x");
      if (i > 0) c.expect(at(i, j, 0).cycles <= at(i - 1, j, 0).cycles, "(a) monotone in rho_w");
    }
  }
  // (b) along the diagonal
  bool below = false, above = false;
  for (std::size_t i = 0; i < g; ++i) {
    const bool faster = at(i, i, 0).effective_tops > at(i, i, 1).effective_tops;
    (faster ? above : below) = true;
  }
  c.expect(below && above, "(b) no crossing against the SIMD baseline");

  // (c)
  HardwareConfig no_dtp = cfg;
  no_dtp.dtp = DtpMode::kOff;
  for (const double rw : spec.rho_w) {
    for (const double rx : spec.rho_x) {
      const auto L = synthetic_pattern(512, 512, 512, rw, rx, 0);
      const auto a = simulate_layer(L, cfg, Arch::kPanacea);
      const auto b = simulate_layer(L, no_dtp, Arch::kPanacea);
      if (a.dtp_enabled) c.expect(a.cycles <= b.cycles, "(c) DTP slower at some grid point");
    }
  }
  const auto hi = synthetic_pattern(512, 512, 512, 0.9, 0.9, 0);
  const auto with = simulate_layer(hi, cfg, Arch::kPanacea);
  const auto without = simulate_layer(hi, no_dtp, Arch::kPanacea);
  const double gain = static_cast<double>(without.cycles) / static_cast<double>(with.cycles);
  c.expect(with.dtp_enabled, "(c) DTP not enabled at rho 0.9");
  c.expect(std::abs(gain - kDtpTarget) <= kDtpTolerance, "(c) DTP gain " + std::to_string(gain));
  c.note() << ", DTP gain " << gain;

  // (d)
  for (std::size_t K : {8u, 32u, 128u}) {
    const auto Kd = static_cast<double>(K);
    for (std::size_t cw = 0; cw <= K; cw += K / 8) {
      for (std::size_t cx = 0; cx <= K; cx += K / 8) {
        const auto ops = ops_of(test::unit_case(test::sparse_tail(K, cw), test::interleaved(K, cx)));
        const auto sim = simulate_layer(pattern_from_operands(ops), cfg, Arch::kPanacea).counters;
        const auto dense = simulate_layer(pattern_from_operands(ops), cfg, Arch::kSaWs).counters;
        const double rw = static_cast<double>(cw) / Kd, rx = static_cast<double>(cx) / Kd;
        c.expect(sim.dram_nibbles == stored_nibbles(ops.w) + stored_nibbles(ops.x), "(d) compressed-operand count");
        c.expect(static_cast<double>(sim.dram_nibbles) * 4 == static_cast<double>(dense.dram_nibbles) * (4 - rw - rx),
                 "(d) ratio to dense loads");
      }
    }
  }
}

void conservation(Check& c) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> dim(1, 128);
  const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int t = 0; t < 200; ++t) {
    const auto gc = test::random_gemm_case(rng, t % 3, 1 + (t / 3) % 3, grid[t % 5], grid[(t / 5) % 5], dim(rng),
                                           dim(rng), dim(rng));
    const auto ops = ops_of(gc);
    const auto L = pattern_from_operands(ops);
    for (const CompMode mode : {CompMode::kEq5, CompMode::kEq6}) {
      HardwareConfig cfg;
      cfg.comp_mode = mode;
      const auto eng = aqs_gemm(ops, mode).workload;
      for (const DtpMode d : {DtpMode::kAuto, DtpMode::kOff}) {
        cfg.dtp = d;
        const auto sim = simulate_layer(L, cfg, Arch::kPanacea).counters;
        c.expect(same_compute(sim, eng) && sim.dram_nibbles == eng.dram_nibbles &&
                     sim.dram_index_nibbles == eng.dram_index_nibbles,
                 "case " + std::to_string(t));
      }
    }
  }
  const auto L = synthetic_pattern(256, 256, 256, 0.6, 0.7, 1);
  HardwareConfig cfg;
  cfg.static_power_mw = 50;
  HardwareConfig twice = cfg;
  twice.static_power_mw *= 2;
  twice.energy = {2 * cfg.energy.mult_4x4,         2 * cfg.energy.add_8b,      2 * cfg.energy.sram_read_nibble,
                  2 * cfg.energy.sram_write_nibble, 2 * cfg.energy.dram_nibble, 2 * cfg.energy.reg_op};
  for (const Arch a : {Arch::kPanacea, Arch::kSibia, Arch::kSimd, Arch::kSaWs, Arch::kSaOs}) {
    const auto r1 = simulate_layer(L, cfg, a);
    const auto r2 = simulate_layer(L, twice, a);
    c.expect(r2.energy_pj == 2 * r1.energy_pj, std::string("energy doubling for ") + to_string(a));
  }
}

void determinism(Check& c) {
  const char* commands[] = {
      "calibrate --input x.aqst --output xp.json",
      "quantize --input x.aqst --params xp.json --output xq.aqst",
      "quantize --input w.aqst --scheme symmetric --bits 7 --output wq.aqst --params-out wq.json",
      "slice --input xq.aqst --params xp.json --output x.aqsl",
      "slice --input wq.aqst --params wq.json --output w.aqsl",
      "compress --input x.aqsl --params xp.json --output x.aqso",
      "compress --input w.aqsl --output w.aqso",
      "gemm --weights w.aqso --activations x.aqso --weight-params wq.json --activation-params xp.json "
      "--verify --output acc.aqst --counters counters.json",
      "gemm --synthetic 96x80x72 --rho-w 0.6 --rho-x 0.7 --output sacc.aqst --counters scounters.json",
      "simulate --weights w.aqso --activations x.aqso --synthetic 256x128x192 --output sim.json --csv sim.csv",
      "sweep --sizes 128x128x128 --output sweep.csv --json sweep.json",
      "report --output-dir report --size 128",
  };
  const test::TempDir a("det_a");
  const test::TempDir b("det_b");
  for (const auto* dir : {&a, &b}) {
    std::mt19937_64 rng(3);
    save_matrix(test::gaussian_floats(rng, 48, 40, 0.0, 0.1), *dir / "w.aqst");
    save_matrix(test::gaussian_floats(rng, 40, 32, 0.2, 0.3), *dir / "x.aqst");
    for (const char* cmd : commands) {
      c.expect(test::run_cli(std::string(cmd) + " --seed 11", dir->path()) == 0, std::string("failed: ") + cmd);
    }
  }
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    c.expect(test::slurp(e.path()) == test::slurp(b.path() / rel), "differs: " + rel.string());
    ++files;
  }
  c.note() << ", " << files << " artifacts";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Check&)> run;
  };
  const Criterion criteria[] = {
      {1, "exactness: eq5 == eq6 == oracle on 1000 random cases", exactness},
      {2, "slicing round-trips (exhaustive)", slicing},
      {3, "workload table equals the closed forms", workload_table},
      {4, "ZPM skip range and calibrated skip mass", zpm},
      {5, "RLE losslessness on 10000 planes", rle},
      {6, "simulator trends", simulator_trends},
      {7, "counter conservation and energy linearity", conservation},
      {8, "CLI determinism", determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    failed += c.ok() ? 0 : 1;
    std::cout << "criterion " << cr.id << ": " << (c.ok() ? "PASS" : "FAIL") << "  " << cr.name << " ("
              << c.summary() << c.extra() << ")" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
