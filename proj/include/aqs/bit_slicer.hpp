#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aqs/matrix.hpp"
#include "aqs/quantizer.hpp"

namespace aqs {

enum class SliceScheme : std::uint8_t { kSbrWeight = 0, kStraightActivation = 1, kDbsActivation = 2 };

// One 4-bit plane. Nibbles are held unpacked; signed planes hold [-8, 7],
// unsigned planes [0, 15]. Positional weight of the plane is 2^shift.
struct SlicePlane {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> nibbles;
  bool is_signed = false;
  int shift = 0;

  std::int8_t operator()(std::size_t r, std::size_t c) const { return nibbles[r * cols + c]; }
  std::int8_t& operator()(std::size_t r, std::size_t c) { return nibbles[r * cols + c]; }

  friend bool operator==(const SlicePlane&, const SlicePlane&) = default;
};

// Planes ordered from highest to lowest shift.
struct SlicedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<SlicePlane> planes;
  int source_bits = 0;
  SliceScheme scheme = SliceScheme::kSbrWeight;

  // SBR weights with n >= 1 and all activations have a high-order plane;
  // 4-bit weights (n = 0) are a single dense plane.
  bool has_ho_plane() const noexcept { return planes.size() > 1; }
  const SlicePlane& ho() const { return planes.front(); }

  friend bool operator==(const SlicedMatrix&, const SlicedMatrix&) = default;
};

// Signed bit-slice representation of a (3n+4)-bit signed matrix: one signed
// 4-bit HO plane at shift 3n and n sign-extended LO planes at 3(n-1) ... 0.
SlicedMatrix slice_sbr(const IntMatrix& w, int source_bits);

// Straightforward slicing of (4k+4)-bit unsigned codes into k+1 unsigned
// planes, or, for 8-bit codes with params.lo_width in {5, 6}, distribution-based
// slicing: HO = v >> l zero-padded to 4 bits, LO = top 4 bits of the l-bit LO.
SlicedMatrix slice_activation(const IntMatrix& x, const QuantParams& params);
SlicedMatrix slice_straight(const IntMatrix& x, int source_bits);

IntMatrix reconstruct(const SlicedMatrix& sm);

// Nibble packing: element 2i in the low nibble, 2i+1 in the high nibble.
std::vector<std::uint8_t> pack_nibbles(std::span<const std::int8_t> nibbles);
std::vector<std::int8_t> unpack_nibbles(std::span<const std::uint8_t> packed, std::size_t count, bool is_signed);

// Binary layout:
//   "AQSL" | version u8 | scheme u8 | source_bits u8 | plane count u8 | rows u64 | cols u64
//   per plane: signed u8 | shift u8 | ceil(rows*cols/2) packed bytes
std::vector<std::uint8_t> encode_sliced(const SlicedMatrix& sm);
SlicedMatrix decode_sliced(std::span<const std::uint8_t> bytes);

}  // namespace aqs
