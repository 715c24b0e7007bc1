#pragma once

#include <array>
#include <cstdint>

namespace aqs {

// Plane-pair classes, weight plane first.
enum class PlanePair : std::uint8_t { kHoHo = 0, kLoHo = 1, kHoLo = 2, kLoLo = 3 };

// Event counts for one GEMM. mults are 4b x 4b multiplications and adds are
// 8b accumulations; memory traffic is in nibbles.
struct WorkloadCounters {
  std::uint64_t mults = 0;
  std::uint64_t adds = 0;
  std::uint64_t dram_nibbles = 0;  // operand slice loads
  std::uint64_t sram_read_nibbles = 0;
  std::uint64_t sram_write_nibbles = 0;
  std::uint64_t compensation_mults = 0;
  std::uint64_t compensation_adds = 0;
  std::uint64_t compensation_dram_nibbles = 0;
  std::uint64_t dram_index_nibbles = 0;  // packed RLE run indices
  std::uint64_t dram_write_nibbles = 0;  // final outputs
  std::uint64_t psum_dram_nibbles = 0;   // partial sums spilled off-chip
  std::uint64_t psum_sram_nibbles = 0;   // partial sums moved through OMEM
  std::array<std::uint64_t, 4> pair_mults{};

  std::uint64_t total_dram_nibbles() const noexcept {
    return dram_nibbles + compensation_dram_nibbles + dram_index_nibbles + dram_write_nibbles + psum_dram_nibbles;
  }

  WorkloadCounters& operator+=(const WorkloadCounters& o) noexcept {
    mults += o.mults;
    adds += o.adds;
    dram_nibbles += o.dram_nibbles;
    sram_read_nibbles += o.sram_read_nibbles;
    sram_write_nibbles += o.sram_write_nibbles;
    compensation_mults += o.compensation_mults;
    compensation_adds += o.compensation_adds;
    compensation_dram_nibbles += o.compensation_dram_nibbles;
    dram_index_nibbles += o.dram_index_nibbles;
    dram_write_nibbles += o.dram_write_nibbles;
    psum_dram_nibbles += o.psum_dram_nibbles;
    psum_sram_nibbles += o.psum_sram_nibbles;
    for (std::size_t i = 0; i < pair_mults.size(); ++i) pair_mults[i] += o.pair_mults[i];
    return *this;
  }
  friend WorkloadCounters operator+(WorkloadCounters a, const WorkloadCounters& b) noexcept { return a += b; }
  friend bool operator==(const WorkloadCounters&, const WorkloadCounters&) = default;
};

}  // namespace aqs
