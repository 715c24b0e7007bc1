#include "aqs/bit_slicer.hpp"

#include <algorithm>

#include "aqs/byte_io.hpp"

namespace aqs {
namespace {

SlicePlane make_plane(std::size_t rows, std::size_t cols, bool is_signed, int shift) {
  return SlicePlane{rows, cols, std::vector<std::int8_t>(rows * cols, 0), is_signed, shift};
}

}  // namespace

SlicedMatrix slice_sbr(const IntMatrix& w, int source_bits) {
  if (source_bits < 4 || (source_bits - 4) % 3 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "SBR needs a (3n+4)-bit source, got " + std::to_string(source_bits));
  }
  const int n = (source_bits - 4) / 3;
  const std::int32_t lo = -(1 << (source_bits - 1));
  const std::int32_t hi = (1 << (source_bits - 1)) - 1;

  SlicedMatrix sm{w.rows, w.cols, {}, source_bits, SliceScheme::kSbrWeight};
  sm.planes.push_back(make_plane(w.rows, w.cols, true, 3 * n));
  for (int j = n - 1; j >= 0; --j) sm.planes.push_back(make_plane(w.rows, w.cols, true, 3 * j));

  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::int32_t v = w.data[i];
    if (v < lo || v > hi) {
      throw Error(ErrorCode::kOutOfRange, "value " + std::to_string(v) + " outside " +
                                              std::to_string(source_bits) + "-bit signed range");
    }
    // For negative values every 3-bit LO field gets the sign bit appended
    // (field - 8) and the slice above absorbs a +1 carry, so the HO of any
    // value in [-8, 7] ends up 0000.
    const std::int32_t sign = v < 0 ? 1 : 0;
    std::int32_t carry = 0;
    for (int j = 0; j < n; ++j) {
      const std::int32_t field = ((v >> (3 * j)) & 7) + carry;
      sm.planes[static_cast<std::size_t>(n - j)].nibbles[i] = static_cast<std::int8_t>(field - 8 * sign);
      carry = sign;
    }
    sm.planes[0].nibbles[i] = static_cast<std::int8_t>((v >> (3 * n)) + carry);
  }
  return sm;
}

SlicedMatrix slice_straight(const IntMatrix& x, int source_bits) {
  if (source_bits < 4 || source_bits % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "straight slicing needs a (4k+4)-bit source");
  }
  const int k = source_bits / 4 - 1;
  const std::int32_t hi = (1 << source_bits) - 1;
  SlicedMatrix sm{x.rows, x.cols, {}, source_bits, SliceScheme::kStraightActivation};
  for (int p = k; p >= 0; --p) sm.planes.push_back(make_plane(x.rows, x.cols, false, 4 * p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::int32_t v = x.data[i];
    if (v < 0 || v > hi) throw Error(ErrorCode::kOutOfRange, "code " + std::to_string(v) + " outside unsigned range");
    for (int p = 0; p <= k; ++p) {
      sm.planes[static_cast<std::size_t>(p)].nibbles[i] = static_cast<std::int8_t>((v >> (4 * (k - p))) & 15);
    }
  }
  return sm;
}

SlicedMatrix slice_activation(const IntMatrix& x, const QuantParams& params) {
  if (params.scheme != QuantScheme::kAsymmetric) {
    throw Error(ErrorCode::kInvalidArgument, "activation slicing needs asymmetric params");
  }
  const int l = params.lo_width;
  if (l == 4 || params.bit_width != 8) {
    if (l != 4) throw Error(ErrorCode::kInvalidArgument, "distribution-based slicing needs 8-bit codes");
    return slice_straight(x, params.bit_width);
  }
  if (l < 4 || l > 6) throw Error(ErrorCode::kInvalidArgument, "lo_width must be 4, 5 or 6");

  SlicedMatrix sm{x.rows, x.cols, {}, 8, SliceScheme::kDbsActivation};
  sm.planes.push_back(make_plane(x.rows, x.cols, false, l));
  sm.planes.push_back(make_plane(x.rows, x.cols, false, l - 4));
  const std::int32_t lo_mask = (1 << l) - 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::int32_t v = x.data[i];
    if (v < 0 || v > 255) throw Error(ErrorCode::kOutOfRange, "code " + std::to_string(v) + " outside [0, 255]");
    sm.planes[0].nibbles[i] = static_cast<std::int8_t>(v >> l);
    sm.planes[1].nibbles[i] = static_cast<std::int8_t>((v & lo_mask) >> (l - 4));
  }
  return sm;
}

IntMatrix reconstruct(const SlicedMatrix& sm) {
  IntMatrix out(sm.rows, sm.cols);
  for (const auto& plane : sm.planes) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += std::int32_t{plane.nibbles[i]} * (1 << plane.shift);
  }
  return out;
}

std::vector<std::uint8_t> pack_nibbles(std::span<const std::int8_t> nibbles) {
  std::vector<std::uint8_t> out((nibbles.size() + 1) / 2, 0);
  for (std::size_t i = 0; i < nibbles.size(); ++i) {
    const auto nib = static_cast<std::uint8_t>(nibbles[i] & 0x0F);
    out[i / 2] |= (i % 2 == 0) ? nib : static_cast<std::uint8_t>(nib << 4);
  }
  return out;
}

std::vector<std::int8_t> unpack_nibbles(std::span<const std::uint8_t> packed, std::size_t count, bool is_signed) {
  if (packed.size() < (count + 1) / 2) throw Error(ErrorCode::kTruncated, "nibble payload too short");
  std::vector<std::int8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto nib = static_cast<std::int8_t>((i % 2 == 0) ? (packed[i / 2] & 0x0F) : (packed[i / 2] >> 4));
    if (is_signed && nib >= 8) nib = static_cast<std::int8_t>(nib - 16);
    out[i] = nib;
  }
  return out;
}

std::vector<std::uint8_t> encode_sliced(const SlicedMatrix& sm) {
  ByteWriter w;
  w.magic("AQSL");
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(sm.scheme));
  w.u8(static_cast<std::uint8_t>(sm.source_bits));
  w.u8(static_cast<std::uint8_t>(sm.planes.size()));
  w.u64(sm.rows);
  w.u64(sm.cols);
  for (const auto& p : sm.planes) {
    w.u8(p.is_signed ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(p.shift));
    w.bytes(pack_nibbles(p.nibbles));
  }
  return std::move(w).take();
}

SlicedMatrix decode_sliced(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("AQSL");
  if (r.u8() != 1) throw Error(ErrorCode::kBadVersion, "unsupported sliced-matrix version");
  SlicedMatrix sm;
  const auto scheme = r.u8();
  if (scheme > 2) throw Error(ErrorCode::kMalformedStream, "unknown slice scheme");
  sm.scheme = static_cast<SliceScheme>(scheme);
  sm.source_bits = r.u8();
  const std::size_t plane_count = r.u8();
  sm.rows = r.dim();
  sm.cols = r.dim();
  const std::size_t count = checked_area(sm.rows, sm.cols);
  for (std::size_t i = 0; i < plane_count; ++i) {
    SlicePlane p;
    p.rows = sm.rows;
    p.cols = sm.cols;
    p.is_signed = r.u8() != 0;
    p.shift = r.u8();
    p.nibbles = unpack_nibbles(r.take((count + 1) / 2), count, p.is_signed);
    sm.planes.push_back(std::move(p));
  }
  r.expect_end();
  return sm;
}

}  // namespace aqs
