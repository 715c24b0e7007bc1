#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aqs/bit_slicer.hpp"

namespace aqs {

inline constexpr std::size_t kVectorLen = 4;
inline constexpr std::uint32_t kMaxRun = 15;

// Weights group 4x1 vectors down the M axis of every column k; activations
// group 1x4 vectors along the N axis of every row k. Either way there is one
// RLE stream per k.
enum class Orientation : std::uint8_t { kWeight4x1 = 0, kActivation1x4 = 1 };

struct RleRecord {
  std::uint8_t run = 0;  // compressed vectors skipped before this one, 0..15
  std::array<std::int8_t, kVectorLen> vector{};
  friend bool operator==(const RleRecord&, const RleRecord&) = default;
};

struct RleStream {
  std::vector<RleRecord> records;
  std::uint32_t trailing_run = 0;
  friend bool operator==(const RleStream&, const RleStream&) = default;
};

struct CompressedPlane {
  Orientation orientation = Orientation::kWeight4x1;
  std::int8_t skip_value = 0;
  bool is_signed = false;
  int shift = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t vectors_per_stream = 0;
  std::vector<RleStream> streams;

  std::size_t record_count() const noexcept;
  std::size_t vector_count() const noexcept { return vectors_per_stream * streams.size(); }

  friend bool operator==(const CompressedPlane&, const CompressedPlane&) = default;
};

// A run longer than 15 is split by a padding record: run 15 followed by an
// explicit compressible vector. Partial vectors at the edge are padded with
// compressible values that are dropped again on decode.
CompressedPlane compress_plane(const SlicePlane& plane, Orientation orientation, std::int8_t r);
SlicePlane decompress_plane(const CompressedPlane& cp);

// Fraction of length-4 vectors that are compressible (all-zero weights,
// all-r activations).
double vector_sparsity(const SlicePlane& plane, Orientation orientation, std::int8_t r);

// Per-(stream, vector) flags, row-major by stream: 1 where the vector is held
// in a record and therefore takes part in the computation.
std::vector<std::uint8_t> stored_vector_mask(const CompressedPlane& cp);

// Records needed to encode a stream with the given per-vector compressibility.
std::size_t count_records(std::span<const std::uint8_t> compressible);

// Positions of a stream that the encoder stores in a record (uncompressed
// vectors plus padding records), matching stored_vector_mask.
std::vector<std::uint8_t> record_positions(std::span<const std::uint8_t> compressible);

// Nibble footprint with 4-bit run indices: 4 vector nibbles + 1 index nibble per record.
std::size_t packed_nibbles(const CompressedPlane& cp) noexcept;

// Byte-aligned stream format:
//   "AQSC" | version u8 | orientation u8 | signed u8 | shift u8 | r u8
//   | rows u64 | cols u64 | vectors_per_stream u64 | stream count u64
//   per stream: record count u32 | trailing run u32 | records (run u8, 2 packed vector bytes)
std::vector<std::uint8_t> encode_compressed(const CompressedPlane& cp);
CompressedPlane decode_compressed(std::span<const std::uint8_t> bytes);

// A sliced operand as it sits in memory: the HO plane compressed, LO planes dense.
struct CompressedOperand {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int source_bits = 0;
  SliceScheme scheme = SliceScheme::kSbrWeight;
  std::optional<CompressedPlane> ho;
  std::vector<SlicePlane> lo_planes;

  Orientation orientation() const noexcept {
    return scheme == SliceScheme::kSbrWeight ? Orientation::kWeight4x1 : Orientation::kActivation1x4;
  }
  std::int8_t skip_value() const noexcept { return ho ? ho->skip_value : 0; }
  std::size_t plane_count() const noexcept { return lo_planes.size() + (ho ? 1 : 0); }

  friend bool operator==(const CompressedOperand&, const CompressedOperand&) = default;
};

CompressedOperand compress_operand(const SlicedMatrix& sm, std::int8_t r = 0);
SlicedMatrix decompress_operand(const CompressedOperand& op);

//   "AQSO" | version u8 | scheme u8 | source_bits u8 | has_ho u8 | lo count u8 | rows u64 | cols u64
//   | [u64 length + AQSC blob] | per LO plane: signed u8 | shift u8 | packed nibbles
std::vector<std::uint8_t> encode_operand(const CompressedOperand& op);
CompressedOperand decode_operand(std::span<const std::uint8_t> bytes);

}  // namespace aqs
