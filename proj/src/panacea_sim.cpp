#include "aqs/panacea_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "aqs/error.hpp"

namespace aqs {
namespace {

constexpr std::size_t kV = kVectorLen;
constexpr std::uint64_t kPsumNibbles = 8;    // 32-bit partial sums
constexpr std::uint64_t kOutputNibbles = 2;  // requantized 8-bit outputs
constexpr std::uint64_t kDenseNibbles = 2;   // 8-bit dense operands
constexpr std::uint64_t kSibiaBits = 7;      // two signed slices carry 7 bits
constexpr std::size_t kSaWsStrip = 16;       // k rows per weight-stationary pass

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

// One bit per k for every vector group, so range counts are popcounts.
class BitRows {
 public:
  BitRows(std::span<const std::uint8_t> flags, std::size_t groups, std::size_t K)
      : words_((K + 63) / 64), bits_(groups * words_, 0) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t g = 0; g < groups; ++g) {
        if (flags[k * groups + g] != 0) bits_[g * words_ + k / 64] |= std::uint64_t{1} << (k % 64);
      }
    }
  }

  std::uint64_t count(std::size_t g, std::size_t k0, std::size_t k1) const { return count_with(g, nullptr, 0, k0, k1); }
  std::uint64_t count_and(std::size_t g, const BitRows& o, std::size_t og, std::size_t k0, std::size_t k1) const {
    return count_with(g, &o, og, k0, k1);
  }

 private:
  std::uint64_t count_with(std::size_t g, const BitRows* o, std::size_t og, std::size_t k0, std::size_t k1) const {
    std::uint64_t n = 0;
    for (std::size_t w = k0 / 64; w * 64 < k1; ++w) {
      std::uint64_t word = bits_[g * words_ + w];
      if (o != nullptr) word &= o->bits_[og * o->words_ + w];
      const std::size_t lo = std::max(k0, w * 64) - w * 64;
      const std::size_t hi = std::min(k1, (w + 1) * 64) - w * 64;
      std::uint64_t mask = hi == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << hi) - 1;
      mask &= ~((std::uint64_t{1} << lo) - 1);
      n += static_cast<std::uint64_t>(std::popcount(word & mask));
    }
    return n;
  }

  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

struct Tiling {
  std::size_t MT, NT, KT;
};

Tiling tiling(const LayerPattern& L, const HardwareConfig& cfg) {
  return {ceil_div(L.M, cfg.TM), ceil_div(L.N, cfg.TN), ceil_div(L.K, cfg.TK)};
}

std::pair<std::size_t, std::size_t> k_range(const HardwareConfig& cfg, const LayerPattern& L, std::size_t kt) {
  return {kt * cfg.TK, std::min(L.K, (kt + 1) * cfg.TK)};
}

std::size_t tile_extent(std::size_t total, std::size_t tile, std::size_t t) {
  return std::min(total, (t + 1) * tile) - t * tile;
}

// Compressed nibbles of one v x (k1-k0) weight sub-tile or (k1-k0) x v activation sub-tile.
struct SubtileSize {
  std::uint64_t ho = 0;     // stored HO vector payload
  std::uint64_t index = 0;  // run fields
  std::uint64_t lo = 0;
  std::uint64_t total() const { return ho + index + lo; }
};

class Operands {
 public:
  Operands(const LayerPattern& L, const HardwareConfig& cfg)
      : L_(L),
        cfg_(cfg),
        w_(L.w_stored, L.MG(), L.K),
        x_(L.x_stored, L.NG(), L.K),
        xz_(L.x_zero_stored, L.NG(), L.K),
        lo_w_(L.w_planes - (L.w_has_ho ? 1 : 0)),
        lo_x_(L.x_planes - (L.x_has_ho ? 1 : 0)) {}

  const BitRows& w() const { return w_; }
  const BitRows& x() const { return x_; }
  const BitRows& x_zero() const { return xz_; }
  std::uint64_t lo_w() const { return lo_w_; }
  std::uint64_t lo_x() const { return lo_x_; }

  std::uint64_t w_stored(std::size_t mg, std::size_t k0, std::size_t k1) const {
    return L_.w_has_ho ? w_.count(mg, k0, k1) : 0;
  }
  std::uint64_t x_stored(std::size_t ng, std::size_t k0, std::size_t k1) const {
    return L_.x_has_ho ? x_.count(ng, k0, k1) : 0;
  }
  std::uint64_t both_stored(std::size_t mg, std::size_t ng, std::size_t k0, std::size_t k1) const {
    return L_.w_has_ho && L_.x_has_ho ? w_.count_and(mg, x_, ng, k0, k1) : 0;
  }

  SubtileSize w_subtile(std::size_t mg, std::size_t k0, std::size_t k1) const {
    const std::uint64_t s = w_stored(mg, k0, k1);
    return {kV * s, s * cfg_.rle_run_bits / 4, kV * lo_w_ * (k1 - k0)};
  }
  SubtileSize x_subtile(std::size_t ng, std::size_t k0, std::size_t k1) const {
    const std::uint64_t s = x_stored(ng, k0, k1);
    return {kV * s, s * cfg_.rle_run_bits / 4, kV * lo_x_ * (k1 - k0)};
  }

  // Compressed nibbles of all weight sub-tiles of m-tile mt (0 if it does not exist).
  std::uint64_t w_tile_nibbles(std::size_t mt) const {
    std::uint64_t n = 0;
    for (std::size_t p = 0; p < cfg_.P; ++p) {
      const std::size_t mg = mt * cfg_.P + p;
      if (mg >= L_.MG()) break;
      n += w_subtile(mg, 0, L_.K).total();
    }
    return n;
  }
  std::uint64_t x_total_nibbles() const {
    std::uint64_t n = 0;
    for (std::size_t ng = 0; ng < L_.NG(); ++ng) n += x_subtile(ng, 0, L_.K).total();
    return n;
  }

 private:
  const LayerPattern& L_;
  const HardwareConfig& cfg_;
  BitRows w_, x_, xz_;
  std::uint64_t lo_w_, lo_x_;
};

void add_compensation(const LayerPattern& L, const Operands& ops, CompMode mode, WorkloadCounters& c) {
  if (!L.x_has_ho || L.skip_value == 0) return;
  const std::uint64_t tiles = L.MG();
  for (std::size_t ng = 0; ng < L.NG(); ++ng) {
    const std::uint64_t stored = ops.x().count(ng, 0, L.K);
    const std::uint64_t selected = mode == CompMode::kEq5 ? L.K - stored : stored;
    c.compensation_mults += 16 * tiles;
    c.compensation_adds += tiles * kV * L.w_planes * selected;
    if (mode == CompMode::kEq5) c.compensation_dram_nibbles += tiles * kV * L.w_planes * selected;
  }
}

void finish(LayerReport& rep, const LayerPattern& L, const HardwareConfig& cfg) {
  rep.layer = L.name;
  rep.M = L.M;
  rep.K = L.K;
  rep.N = L.N;
  rep.energy = energy_of(rep.counters, rep.reg_nibbles, rep.cycles, cfg);
  rep.energy_pj = rep.energy.total();
  const double ops = 2.0 * static_cast<double>(L.M) * static_cast<double>(L.N) * static_cast<double>(L.K);
  rep.effective_tops = rep.cycles == 0 ? 0.0 : ops * cfg.clock_ghz / (static_cast<double>(rep.cycles) * 1000.0);
  rep.tops_per_watt_relative = rep.energy_pj == 0.0 ? 0.0 : ops / rep.energy_pj;
}

// Output-stationary psum traffic in OMEM for one group: read back (except on
// the first k-tile) and written once per pass.
void add_psum(WorkloadCounters& c, std::uint64_t area, std::uint64_t passes, bool first_kt) {
  const std::uint64_t writes = passes * area * kPsumNibbles;
  const std::uint64_t reads = (passes - (first_kt ? 1 : 0)) * area * kPsumNibbles;
  c.sram_write_nibbles += writes;
  c.sram_read_nibbles += reads;
  c.psum_sram_nibbles += writes + reads;
}

std::uint64_t step_cycles_dtp(std::uint64_t D, std::uint64_t S_first, std::uint64_t S_second,
                              const HardwareConfig& cfg) {
  const std::uint64_t d = cfg.dwo_per_pea;
  const std::uint64_t w = cfg.swo_per_pea;
  return std::max({ceil_div(D, d), ceil_div(S_first, w), ceil_div(D + S_first + S_second, d + w)});
}

LayerReport run_panacea(const LayerPattern& L, const HardwareConfig& cfg, bool dtp) {
  const Operands ops(L, cfg);
  const Tiling t = tiling(L, cfg);
  LayerReport rep;
  rep.arch = Arch::kPanacea;
  rep.rho_w = L.rho_w;
  rep.rho_x = L.rho_x;
  rep.dtp_enabled = dtp;
  WorkloadCounters& c = rep.counters;

  const std::size_t tiles_per_unit = dtp ? 2 : 1;
  const std::size_t units = ceil_div(t.MT, tiles_per_unit);
  const bool x_resident = ceil_div(ops.x_total_nibbles(), 2) <= cfg.amem_bytes;

  for (std::size_t u = 0; u < units; ++u) {
    const std::size_t mt0 = u * tiles_per_unit;
    const std::size_t mt_end = std::min(t.MT, mt0 + tiles_per_unit);
    std::uint64_t unit_w_nibbles = 0;
    for (std::size_t mt = mt0; mt < mt_end; ++mt) unit_w_nibbles += ops.w_tile_nibbles(mt);
    const bool w_resident = ceil_div(unit_w_nibbles, 2) <= cfg.wmem_bytes;
    std::uint64_t unit_rows = 0;
    for (std::size_t mt = mt0; mt < mt_end; ++mt) unit_rows += tile_extent(L.M, cfg.TM, mt);

    for (std::size_t nt = 0; nt < t.NT; ++nt) {
      const std::uint64_t cols = tile_extent(L.N, cfg.TN, nt);
      for (std::size_t kt = 0; kt < t.KT; ++kt) {
        const auto [k0, k1] = k_range(cfg, L, kt);
        const std::uint64_t klen = k1 - k0;

        std::uint64_t w_group = 0;
        SubtileSize w_load;
        for (std::size_t mt = mt0; mt < mt_end; ++mt) {
          for (std::size_t p = 0; p < cfg.P; ++p) {
            const std::size_t mg = mt * cfg.P + p;
            if (mg >= L.MG()) break;
            const SubtileSize s = ops.w_subtile(mg, k0, k1);
            w_group += s.total();
            if (nt == 0 || !w_resident) {
              w_load.ho += s.ho;
              w_load.index += s.index;
              w_load.lo += s.lo;
            }
          }
        }
        SubtileSize x_load;
        for (std::size_t j = 0; j < cfg.R; ++j) {
          const std::size_t ng = nt * cfg.R + j;
          if (ng >= L.NG()) break;
          const SubtileSize s = ops.x_subtile(ng, k0, k1);
          if (u == 0 || !x_resident) {
            x_load.ho += s.ho;
            x_load.index += s.index;
            x_load.lo += s.lo;
          }
        }

        // Compute: R steps, each a max over PEAs.
        std::uint64_t compute = 0;
        for (std::size_t j = 0; j < cfg.R; ++j) {
          const std::size_t ng = nt * cfg.R + j;
          if (ng >= L.NG()) break;
          const std::uint64_t xs = ops.x_stored(ng, k0, k1);
          std::uint64_t step = 0;
          struct PeaWork {
            std::uint64_t D, S_first, S_second;
          };
          std::vector<PeaWork> work(cfg.P, PeaWork{0, 0, 0});
          for (std::size_t mt = mt0; mt < mt_end; ++mt) {
            for (std::size_t p = 0; p < cfg.P; ++p) {
              const std::size_t mg = mt * cfg.P + p;
              if (mg >= L.MG()) break;
              const std::uint64_t ws = ops.w_stored(mg, k0, k1);
              const std::uint64_t hoho = ops.both_stored(mg, ng, k0, k1);
              const std::uint64_t loho = ops.lo_w() * xs;
              const std::uint64_t holo = ops.lo_x() * ws;
              const std::uint64_t lolo = ops.lo_w() * ops.lo_x() * klen;
              c.pair_mults[static_cast<std::size_t>(PlanePair::kHoHo)] += 16 * hoho;
              c.pair_mults[static_cast<std::size_t>(PlanePair::kLoHo)] += 16 * loho;
              c.pair_mults[static_cast<std::size_t>(PlanePair::kHoLo)] += 16 * holo;
              c.pair_mults[static_cast<std::size_t>(PlanePair::kLoLo)] += 16 * lolo;
              work[p].D += hoho + loho + holo;
              (mt == mt0 ? work[p].S_first : work[p].S_second) += lolo;
            }
          }
          for (const auto& pw : work) step = std::max(step, step_cycles_dtp(pw.D, pw.S_first, pw.S_second, cfg));
          for (const auto& pw : work) {
            const std::uint64_t S = pw.S_first + pw.S_second;
            const std::uint64_t spill = S > cfg.swo_per_pea * step ? S - cfg.swo_per_pea * step : 0;
            rep.dwo_busy_cycles += pw.D + spill;
            rep.swo_busy_cycles += S - spill;
          }
          compute += step;
          // One activation sub-tile read feeds every weight sub-tile held by the PEAs.
          c.sram_read_nibbles += ops.x_subtile(ng, k0, k1).total();
          rep.reg_nibbles += w_group;
        }

        c.sram_read_nibbles += w_group;  // WMEM to WBUF, reused over the R steps
        const std::uint64_t loaded = w_load.total() + x_load.total();
        c.dram_nibbles += w_load.ho + w_load.lo + x_load.ho + x_load.lo;
        c.dram_index_nibbles += w_load.index + x_load.index;
        c.sram_write_nibbles += loaded;
        std::uint64_t written = 0;
        if (kt + 1 == t.KT) {
          written = kOutputNibbles * unit_rows * cols;
          c.dram_write_nibbles += written;
        }
        add_psum(c, unit_rows * cols, 1, kt == 0);

        const std::uint64_t transfer = ceil_div((loaded + written) * 4, cfg.dram_bits_per_cycle);
        rep.cycles += std::max(compute, transfer);
        rep.compute_cycles += compute;
        (compute >= transfer ? rep.compute_bound_groups : rep.transfer_bound_groups) += 1;
      }
    }
  }
  for (const auto pm : c.pair_mults) c.mults += pm;
  c.adds = c.mults;
  add_compensation(L, ops, cfg.comp_mode, c);
  finish(rep, L, cfg);
  return rep;
}

LayerReport run_dense(const LayerPattern& L, const HardwareConfig& cfg, Arch arch) {
  const Tiling t = tiling(L, cfg);
  const bool sibia = arch == Arch::kSibia;
  const Operands ops(L, cfg);
  LayerReport rep;
  rep.arch = arch;
  rep.rho_w = L.rho_w;
  rep.rho_x = sibia ? L.rho_x_zero : L.rho_x;
  WorkloadCounters& c = rep.counters;

  // Operand footprint in nibbles for a rows x cols block.
  auto dense_nibbles = [&](std::uint64_t rows, std::uint64_t cols) {
    return sibia ? ceil_div(rows * cols * kSibiaBits, 4) : rows * cols * kDenseNibbles;
  };
  const bool skip_weights = L.rho_w >= L.rho_x_zero;
  const bool x_resident = ceil_div(dense_nibbles(L.K, L.N), 2) <= cfg.amem_bytes;

  for (std::size_t mt = 0; mt < t.MT; ++mt) {
    const std::uint64_t rows = tile_extent(L.M, cfg.TM, mt);
    const bool w_resident = ceil_div(dense_nibbles(rows, L.K), 2) <= cfg.wmem_bytes;
    for (std::size_t nt = 0; nt < t.NT; ++nt) {
      const std::uint64_t cols = tile_extent(L.N, cfg.TN, nt);
      for (std::size_t kt = 0; kt < t.KT; ++kt) {
        const auto [k0, k1] = k_range(cfg, L, kt);
        const std::uint64_t klen = k1 - k0;

        std::uint64_t compute = 0;
        if (sibia) {
          // Two slices per operand; HO pairs of the skipped side vanish when its vector is zero.
          std::uint64_t outer = 0;
          const std::size_t mg0 = mt * cfg.TM / kV;
          const std::size_t mg1 = ceil_div(mt * cfg.TM + rows, kV);
          const std::size_t ng0 = nt * cfg.TN / kV;
          const std::size_t ng1 = ceil_div(nt * cfg.TN + cols, kV);
          for (std::size_t mg = mg0; mg < mg1; ++mg) {
            for (std::size_t ng = ng0; ng < ng1; ++ng) {
              const std::uint64_t stored =
                  skip_weights ? ops.w().count(mg, k0, k1) : ops.x_zero().count(ng, k0, k1);
              outer += 2 * stored + 2 * klen;
              const auto hoho = static_cast<std::size_t>(PlanePair::kHoHo);
              const auto skip_other = static_cast<std::size_t>(skip_weights ? PlanePair::kHoLo : PlanePair::kLoHo);
              const auto keep_other = static_cast<std::size_t>(skip_weights ? PlanePair::kLoHo : PlanePair::kHoLo);
              c.pair_mults[hoho] += 16 * stored;
              c.pair_mults[skip_other] += 16 * stored;
              c.pair_mults[keep_other] += 16 * klen;
              c.pair_mults[static_cast<std::size_t>(PlanePair::kLoLo)] += 16 * klen;
            }
          }
          c.mults += 16 * outer;
          compute = ceil_div(outer, cfg.baseline_opcs());
        } else {
          const std::uint64_t macs = rows * cols * klen;
          c.mults += 4 * macs;
          compute = ceil_div(macs, cfg.baseline_macs_per_cycle());
        }

        const std::uint64_t w_tile = dense_nibbles(rows, klen);
        const std::uint64_t x_tile = dense_nibbles(klen, cols);
        const std::uint64_t loaded = ((nt == 0 || !w_resident) ? w_tile : 0) + ((mt == 0 || !x_resident) ? x_tile : 0);
        c.dram_nibbles += loaded;
        c.sram_write_nibbles += loaded;
        // SIMD lanes see 16 output rows at a time, so activations are re-read per row block.
        const std::uint64_t x_reads = arch == Arch::kSimd ? ceil_div(rows, 16) : 1;
        c.sram_read_nibbles += w_tile + x_reads * x_tile;

        std::uint64_t written = 0;
        if (kt + 1 == t.KT) {
          written = kOutputNibbles * rows * cols;
          c.dram_write_nibbles += written;
        }
        if (arch == Arch::kSaWs) {
          add_psum(c, rows * cols, ceil_div(klen, kSaWsStrip), kt == 0);
        } else if (arch == Arch::kSaOs) {
          if (kt + 1 == t.KT) add_psum(c, rows * cols, 1, true);
        } else {
          add_psum(c, rows * cols, 1, kt == 0);
        }

        const std::uint64_t transfer = ceil_div((loaded + written) * 4, cfg.dram_bits_per_cycle);
        rep.cycles += std::max(compute, transfer);
        rep.compute_cycles += compute;
        (compute >= transfer ? rep.compute_bound_groups : rep.transfer_bound_groups) += 1;
      }
    }
  }
  c.adds = c.mults;
  finish(rep, L, cfg);
  return rep;
}

std::vector<std::uint8_t> vector_flags(const CompressedPlane& cp, std::int8_t value) {
  const SlicePlane plane = decompress_plane(cp);
  const bool weights = cp.orientation == Orientation::kWeight4x1;
  const std::size_t streams = weights ? plane.cols : plane.rows;
  const std::size_t axis = weights ? plane.rows : plane.cols;
  const std::size_t vps = cp.vectors_per_stream;
  std::vector<std::uint8_t> flags(streams * vps, 0);
  for (std::size_t s = 0; s < streams; ++s) {
    for (std::size_t v = 0; v < vps; ++v) {
      bool all = true;
      for (std::size_t e = 0; e < kV && all; ++e) {
        const std::size_t pos = v * kV + e;
        if (pos >= axis) continue;
        all = (weights ? plane(pos, s) : plane(s, pos)) == value;
      }
      flags[s * vps + v] = all ? 1 : 0;
    }
  }
  return flags;
}

double fraction_set(const std::vector<std::uint8_t>& flags) {
  if (flags.empty()) return 0.0;
  return static_cast<double>(std::count(flags.begin(), flags.end(), std::uint8_t{1})) /
         static_cast<double>(flags.size());
}

std::vector<std::uint8_t> invert(std::vector<std::uint8_t> flags) {
  for (auto& f : flags) f = f != 0 ? 0 : 1;
  return flags;
}

// Compressible set of exactly round(rho * streams * vps) vectors, then the
// encoder's record placement per stream.
std::pair<std::vector<std::uint8_t>, double> synthetic_stored(std::size_t streams, std::size_t vps, double rho,
                                                              std::mt19937_64& rng) {
  const std::size_t total = streams * vps;
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Explicit Fisher-Yates: std::shuffle's draw sequence is implementation-defined.
  for (std::size_t i = total; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto chosen = static_cast<std::size_t>(std::llround(rho * static_cast<double>(total)));
  std::vector<std::uint8_t> compressible(total, 0);
  for (std::size_t i = 0; i < chosen; ++i) compressible[order[i]] = 1;
  std::vector<std::uint8_t> stored(total, 0);
  for (std::size_t s = 0; s < streams; ++s) {
    const auto pos = record_positions(std::span<const std::uint8_t>(compressible).subspan(s * vps, vps));
    std::copy(pos.begin(), pos.end(), stored.begin() + static_cast<std::ptrdiff_t>(s * vps));
  }
  return {stored, total == 0 ? 0.0 : static_cast<double>(chosen) / static_cast<double>(total)};
}

void check_rho(double rho, const char* what) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, std::string(what) + " must lie in [0, 1], got " + std::to_string(rho));
  }
}

}  // namespace

const char* to_string(Arch arch) noexcept {
  switch (arch) {
    case Arch::kPanacea: return "panacea";
    case Arch::kSibia: return "sibia";
    case Arch::kSimd: return "simd";
    case Arch::kSaWs: return "sa_ws";
    case Arch::kSaOs: return "sa_os";
  }
  return "?";
}

Arch arch_from_string(const std::string& name) {
  for (const Arch a : {Arch::kPanacea, Arch::kSibia, Arch::kSimd, Arch::kSaWs, Arch::kSaOs}) {
    if (name == to_string(a)) return a;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown arch '" + name + "'");
}

void HardwareConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be positive");
  };
  positive(P, "P");
  positive(v, "v");
  positive(dwo_per_pea, "dwo_per_pea");
  positive(swo_per_pea, "swo_per_pea");
  positive(multipliers_per_opc, "multipliers_per_opc");
  positive(TM, "TM");
  positive(TK, "TK");
  positive(TN, "TN");
  positive(R, "R");
  positive(wmem_bytes, "wmem_bytes");
  positive(amem_bytes, "amem_bytes");
  positive(omem_bytes, "omem_bytes");
  positive(wbuf_bytes, "wbuf_bytes");
  positive(dram_bits_per_cycle, "dram_bits_per_cycle");
  if (v != kV) throw Error(ErrorCode::kInvalidArgument, "vector length is fixed at 4 by the slice format");
  if (TM != P * v) throw Error(ErrorCode::kInvalidArgument, "TM must equal P * v");
  if (TN != R * v) throw Error(ErrorCode::kInvalidArgument, "TN must equal R * v");
  if (rle_run_bits != 4) throw Error(ErrorCode::kInvalidArgument, "run fields are 4 bits in the stream format");
  if (TM * TN * kPsumNibbles > 2 * omem_bytes) {
    throw Error(ErrorCode::kInvalidArgument, "a TM x TN partial-sum tile must fit OMEM");
  }
  if (!(clock_ghz > 0.0)) throw Error(ErrorCode::kInvalidArgument, "clock_ghz must be positive");
  if (!(static_power_mw >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "static_power_mw must be non-negative");
  for (const double e : {energy.mult_4x4, energy.add_8b, energy.sram_read_nibble, energy.sram_write_nibble,
                         energy.dram_nibble, energy.reg_op}) {
    if (!(e >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "energy entries must be non-negative");
  }
}

void LayerPattern::validate() const {
  if (M == 0 || K == 0 || N == 0) throw Error(ErrorCode::kInvalidArgument, "layer dimensions must be positive");
  if (w_planes < 1 || x_planes < 1) throw Error(ErrorCode::kInvalidArgument, "operands need at least one plane");
  if ((w_has_ho && w_planes < 2) || (x_has_ho && x_planes < 2)) {
    throw Error(ErrorCode::kInvalidArgument, "an HO plane needs at least one LO plane below it");
  }
  if (w_stored.size() != K * MG() || x_stored.size() != K * NG() || x_zero_stored.size() != K * NG()) {
    throw Error(ErrorCode::kShapeMismatch, "vector masks do not match the layer shape");
  }
  check_rho(rho_w, "rho_w");
  check_rho(rho_x, "rho_x");
  check_rho(rho_x_zero, "rho_x_zero");
}

double LayerReport::dwo_utilization(const HardwareConfig& cfg) const noexcept {
  const double slots = static_cast<double>(compute_cycles) * static_cast<double>(cfg.P * cfg.dwo_per_pea);
  return slots == 0.0 ? 0.0 : static_cast<double>(dwo_busy_cycles) / slots;
}

double LayerReport::swo_utilization(const HardwareConfig& cfg) const noexcept {
  const double slots = static_cast<double>(compute_cycles) * static_cast<double>(cfg.P * cfg.swo_per_pea);
  return slots == 0.0 ? 0.0 : static_cast<double>(swo_busy_cycles) / slots;
}

LayerPattern pattern_from_operands(const CompressedOperand& w, const CompressedOperand& x, std::string name) {
  if (w.scheme != SliceScheme::kSbrWeight || w.orientation() != Orientation::kWeight4x1) {
    throw Error(ErrorCode::kInvalidArgument, "panacea weights must be SBR-sliced 4x1 streams");
  }
  if (x.scheme == SliceScheme::kSbrWeight) throw Error(ErrorCode::kInvalidArgument, "activations must be unsigned slices");
  if (w.cols != x.rows) throw Error(ErrorCode::kShapeMismatch, "W cols differ from x rows");
  LayerPattern L;
  L.name = std::move(name);
  L.M = w.rows;
  L.K = w.cols;
  L.N = x.cols;
  L.w_planes = w.plane_count();
  L.x_planes = x.plane_count();
  L.w_has_ho = w.ho.has_value();
  L.x_has_ho = x.ho.has_value();
  L.skip_value = x.skip_value();
  if (w.ho) {
    L.w_stored = stored_vector_mask(*w.ho);
    L.rho_w = fraction_set(vector_flags(*w.ho, 0));
  } else {
    L.w_stored.assign(L.K * L.MG(), 1);
  }
  if (x.ho) {
    L.x_stored = stored_vector_mask(*x.ho);
    L.rho_x = fraction_set(vector_flags(*x.ho, x.ho->skip_value));
    const auto zero = vector_flags(*x.ho, 0);
    L.rho_x_zero = fraction_set(zero);
    L.x_zero_stored = invert(zero);
  } else {
    L.x_stored.assign(L.K * L.NG(), 1);
    L.x_zero_stored = L.x_stored;
  }
  L.validate();
  return L;
}

LayerPattern pattern_from_operands(const GemmOperands& ops, std::string name) {
  ops.validate();
  return pattern_from_operands(ops.w, ops.x, std::move(name));
}

LayerPattern synthetic_pattern(std::size_t M, std::size_t K, std::size_t N, double rho_w, double rho_x,
                               std::uint64_t seed, std::int32_t skip_value) {
  check_rho(rho_w, "rho_w");
  check_rho(rho_x, "rho_x");
  if (M == 0 || K == 0 || N == 0) throw Error(ErrorCode::kInvalidArgument, "layer dimensions must be positive");
  LayerPattern L;
  L.M = M;
  L.K = K;
  L.N = N;
  L.skip_value = skip_value;
  // Independent streams per operand so rho_w does not perturb the activation draw.
  std::mt19937_64 rng_w(seed * 2 + 1);
  std::mt19937_64 rng_x(seed * 2 + 2);
  std::tie(L.w_stored, L.rho_w) = synthetic_stored(K, L.MG(), rho_w, rng_w);
  std::tie(L.x_stored, L.rho_x) = synthetic_stored(K, L.NG(), rho_x, rng_x);
  L.x_zero_stored = L.x_stored;
  L.rho_x_zero = L.rho_x;
  L.validate();
  return L;
}

bool dtp_enable_check(std::uint64_t pair_tile_nibbles, std::uint64_t max_subtile_pair_nibbles,
                      const HardwareConfig& cfg) noexcept {
  return ceil_div(pair_tile_nibbles, 2) <= cfg.wmem_bytes && ceil_div(max_subtile_pair_nibbles, 2) <= cfg.wbuf_bytes;
}

bool dtp_enable_check(const LayerPattern& L, const HardwareConfig& cfg) {
  cfg.validate();
  L.validate();
  const Tiling t = tiling(L, cfg);
  if (t.MT < 2) return false;
  const Operands ops(L, cfg);
  for (std::size_t a = 0; a + 1 < t.MT; a += 2) {
    const std::uint64_t pair = ops.w_tile_nibbles(a) + ops.w_tile_nibbles(a + 1);
    std::uint64_t worst = 0;
    for (std::size_t kt = 0; kt < t.KT; ++kt) {
      const auto [k0, k1] = k_range(cfg, L, kt);
      for (std::size_t p = 0; p < cfg.P; ++p) {
        const std::size_t ga = a * cfg.P + p;
        const std::size_t gb = (a + 1) * cfg.P + p;
        std::uint64_t n = ops.w_subtile(ga, k0, k1).total();
        if (gb < L.MG()) n += ops.w_subtile(gb, k0, k1).total();
        worst = std::max(worst, n);
      }
    }
    if (!dtp_enable_check(pair, worst, cfg)) return false;
  }
  return true;
}

LayerReport simulate_dtp(const LayerPattern& layer, const HardwareConfig& cfg) {
  cfg.validate();
  layer.validate();
  return run_panacea(layer, cfg, dtp_enable_check(layer, cfg));
}

LayerReport simulate_baseline(const LayerPattern& layer, const HardwareConfig& cfg, Arch arch) {
  if (arch == Arch::kPanacea) throw Error(ErrorCode::kInvalidArgument, "panacea is not a baseline");
  cfg.validate();
  layer.validate();
  return run_dense(layer, cfg, arch);
}

LayerReport simulate_layer(const LayerPattern& layer, const HardwareConfig& cfg, Arch arch) {
  if (arch != Arch::kPanacea) return simulate_baseline(layer, cfg, arch);
  if (cfg.dtp == DtpMode::kAuto) return simulate_dtp(layer, cfg);
  cfg.validate();
  layer.validate();
  return run_panacea(layer, cfg, false);
}

EnergyBreakdown energy_of(const WorkloadCounters& c, std::uint64_t reg_nibbles, std::uint64_t cycles,
                          const HardwareConfig& cfg) noexcept {
  const EnergyTable& e = cfg.energy;
  auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  EnergyBreakdown b;
  b.compute_pj = d(c.mults + c.compensation_mults) * e.mult_4x4 + d(c.adds + c.compensation_adds) * e.add_8b;
  b.sram_pj = d(c.sram_read_nibbles) * e.sram_read_nibble + d(c.sram_write_nibbles) * e.sram_write_nibble;
  b.dram_pj = d(c.total_dram_nibbles()) * e.dram_nibble;
  b.register_pj = d(reg_nibbles) * e.reg_op;
  b.static_pj = cfg.static_power_mw * d(cycles) / cfg.clock_ghz;
  return b;
}

WorkloadCounters ClosedForm::to_counters() const {
  auto exact = [](double v, const char* what) {
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9 || r < 0) {
      throw Error(ErrorCode::kInvalidArgument, std::string(what) + " is not a whole count: " + std::to_string(v));
    }
    return static_cast<std::uint64_t>(r);
  };
  WorkloadCounters c;
  c.mults = exact(mults, "mults");
  c.adds = exact(adds, "adds");
  c.dram_nibbles = exact(dram_nibbles, "dram_nibbles");
  c.compensation_mults = exact(compensation_mults, "compensation_mults");
  c.compensation_adds = exact(compensation_adds, "compensation_adds");
  c.compensation_dram_nibbles = exact(compensation_dram_nibbles, "compensation_dram_nibbles");
  return c;
}

ClosedForm closed_form_workloads(std::size_t K, double rho_w, double rho_x, Arch arch, CompMode mode) {
  check_rho(rho_w, "rho_w");
  check_rho(rho_x, "rho_x");
  const double k = static_cast<double>(K);
  ClosedForm f;
  switch (arch) {
    case Arch::kPanacea:
      f.mults = f.adds = 16.0 * k * (2.0 - rho_x) * (2.0 - rho_w);
      f.dram_nibbles = 4.0 * k * (4.0 - rho_w - rho_x);
      f.compensation_mults = 16.0;
      if (mode == CompMode::kEq5) {
        f.compensation_adds = 8.0 * k * rho_x;
        f.compensation_dram_nibbles = 8.0 * k * rho_x;
      } else {
        f.compensation_adds = 8.0 * k * (1.0 - rho_x);
      }
      break;
    case Arch::kSibia:
      f.mults = f.adds = 32.0 * k * (2.0 - std::max(rho_w, rho_x));
      f.dram_nibbles = 14.0 * k;
      break;
    case Arch::kSimd:
    case Arch::kSaWs:
    case Arch::kSaOs:
      f.mults = f.adds = 64.0 * k;
      f.dram_nibbles = 16.0 * k;
      break;
  }
  return f;
}

void SweepSpec::validate() const {
  if (rho_w.empty() || rho_x.empty() || sizes.empty() || archs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sweep grids must be non-empty");
  }
  for (const double r : rho_w) check_rho(r, "rho_w");
  for (const double r : rho_x) check_rho(r, "rho_x");
  for (const auto& s : sizes) {
    if (s.M == 0 || s.K == 0 || s.N == 0) throw Error(ErrorCode::kInvalidArgument, "sweep sizes must be positive");
  }
}

std::vector<SweepRow> sweep(const SweepSpec& spec, const HardwareConfig& base) {
  spec.validate();
  std::vector<std::pair<std::string, HardwareConfig>> variants = spec.variants;
  if (variants.empty()) variants.emplace_back("base", base);
  for (const auto& [name, cfg] : variants) cfg.validate();

  std::vector<SweepRow> rows;
  for (const auto& [name, cfg] : variants) {
    for (const auto& s : spec.sizes) {
      for (const double rw : spec.rho_w) {
        for (const double rx : spec.rho_x) {
          LayerPattern L = synthetic_pattern(s.M, s.K, s.N, rw, rx, spec.seed);
          L.name = std::to_string(s.M) + "x" + std::to_string(s.K) + "x" + std::to_string(s.N);
          for (const Arch a : spec.archs) rows.push_back({name, simulate_layer(L, cfg, a)});
        }
      }
    }
  }
  return rows;
}

}  // namespace aqs
