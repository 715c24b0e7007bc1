#include "aqs/slice_compressor.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "aqs/byte_io.hpp"

namespace aqs {
namespace {

struct Geometry {
  std::size_t streams;
  std::size_t axis_len;
  bool weights;
};

Geometry geometry(std::size_t rows, std::size_t cols, Orientation o) {
  const bool w = o == Orientation::kWeight4x1;
  return {w ? cols : rows, w ? rows : cols, w};
}

std::size_t index_of(const Geometry& g, std::size_t cols, std::size_t stream, std::size_t pos) {
  return g.weights ? pos * cols + stream : stream * cols + pos;
}

std::array<std::int8_t, kVectorLen> gather(const SlicePlane& plane, const Geometry& g, std::size_t stream,
                                           std::size_t vec, std::int8_t pad) {
  std::array<std::int8_t, kVectorLen> v{};
  for (std::size_t e = 0; e < kVectorLen; ++e) {
    const std::size_t pos = vec * kVectorLen + e;
    v[e] = pos < g.axis_len ? plane.nibbles[index_of(g, plane.cols, stream, pos)] : pad;
  }
  return v;
}

bool compressible(const std::array<std::int8_t, kVectorLen>& v, std::int8_t r) {
  return std::all_of(v.begin(), v.end(), [r](std::int8_t x) { return x == r; });
}

void check_skip_value(const SlicePlane& plane, Orientation o, std::int8_t r) {
  if (o == Orientation::kWeight4x1 && r != 0) {
    throw Error(ErrorCode::kInvalidArgument, "weight vectors compress on zero only");
  }
  const int lo = plane.is_signed ? -8 : 0;
  const int hi = plane.is_signed ? 7 : 15;
  if (r < lo || r > hi) throw Error(ErrorCode::kOutOfRange, "skip value " + std::to_string(r) + " is not a nibble");
}

std::size_t vectors_for(std::size_t axis_len) { return (axis_len + kVectorLen - 1) / kVectorLen; }

}  // namespace

std::size_t CompressedPlane::record_count() const noexcept {
  return std::accumulate(streams.begin(), streams.end(), std::size_t{0},
                         [](std::size_t acc, const RleStream& s) { return acc + s.records.size(); });
}

CompressedPlane compress_plane(const SlicePlane& plane, Orientation orientation, std::int8_t r) {
  check_skip_value(plane, orientation, r);
  const Geometry g = geometry(plane.rows, plane.cols, orientation);
  CompressedPlane cp;
  cp.orientation = orientation;
  cp.skip_value = r;
  cp.is_signed = plane.is_signed;
  cp.shift = plane.shift;
  cp.rows = plane.rows;
  cp.cols = plane.cols;
  cp.vectors_per_stream = vectors_for(g.axis_len);
  cp.streams.resize(g.streams);

  for (std::size_t s = 0; s < g.streams; ++s) {
    RleStream& out = cp.streams[s];
    std::uint32_t run = 0;
    for (std::size_t vec = 0; vec < cp.vectors_per_stream; ++vec) {
      const auto v = gather(plane, g, s, vec, r);
      if (compressible(v, r)) {
        if (run == kMaxRun) {
          out.records.push_back({static_cast<std::uint8_t>(kMaxRun), v});
          run = 0;
        } else {
          ++run;
        }
        continue;
      }
      out.records.push_back({static_cast<std::uint8_t>(run), v});
      run = 0;
    }
    out.trailing_run = run;
  }
  // Runs that reach the end of a stream never need padding records; fold any
  // padding emitted inside the trailing run back into it.
  for (auto& stream : cp.streams) {
    while (!stream.records.empty() && compressible(stream.records.back().vector, r) &&
           stream.records.back().run == kMaxRun) {
      stream.trailing_run += kMaxRun + 1;
      stream.records.pop_back();
    }
  }
  return cp;
}

SlicePlane decompress_plane(const CompressedPlane& cp) {
  const Geometry g = geometry(cp.rows, cp.cols, cp.orientation);
  if (cp.streams.size() != g.streams || cp.vectors_per_stream != vectors_for(g.axis_len)) {
    throw Error(ErrorCode::kMalformedStream, "stream geometry does not match plane shape");
  }
  SlicePlane plane{cp.rows, cp.cols, std::vector<std::int8_t>(checked_area(cp.rows, cp.cols), cp.skip_value),
                   cp.is_signed, cp.shift};
  for (std::size_t s = 0; s < g.streams; ++s) {
    const RleStream& stream = cp.streams[s];
    std::size_t vec = 0;
    for (const auto& rec : stream.records) {
      if (rec.run > kMaxRun) throw Error(ErrorCode::kMalformedStream, "run exceeds 15");
      vec += rec.run;
      if (vec >= cp.vectors_per_stream) throw Error(ErrorCode::kMalformedStream, "run overflows stream");
      for (std::size_t e = 0; e < kVectorLen; ++e) {
        const std::size_t pos = vec * kVectorLen + e;
        if (pos < g.axis_len) plane.nibbles[index_of(g, cp.cols, s, pos)] = rec.vector[e];
      }
      ++vec;
    }
    if (vec + stream.trailing_run != cp.vectors_per_stream) {
      throw Error(ErrorCode::kMalformedStream, "stream length mismatch");
    }
  }
  return plane;
}

double vector_sparsity(const SlicePlane& plane, Orientation orientation, std::int8_t r) {
  const Geometry g = geometry(plane.rows, plane.cols, orientation);
  const std::size_t per_stream = vectors_for(g.axis_len);
  const std::size_t total = per_stream * g.streams;
  if (total == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < g.streams; ++s) {
    for (std::size_t vec = 0; vec < per_stream; ++vec) hits += compressible(gather(plane, g, s, vec, r), r) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<std::uint8_t> stored_vector_mask(const CompressedPlane& cp) {
  std::vector<std::uint8_t> mask(cp.vector_count(), 0);
  for (std::size_t s = 0; s < cp.streams.size(); ++s) {
    std::size_t vec = 0;
    for (const auto& rec : cp.streams[s].records) {
      vec += rec.run;
      if (vec >= cp.vectors_per_stream) throw Error(ErrorCode::kMalformedStream, "run overflows stream");
      mask[s * cp.vectors_per_stream + vec] = 1;
      ++vec;
    }
  }
  return mask;
}

std::size_t count_records(std::span<const std::uint8_t> compressible_flags) {
  std::size_t records = 0;
  std::size_t run = 0;
  for (const auto c : compressible_flags) {
    if (c != 0) {
      ++run;
      continue;
    }
    records += run / (kMaxRun + 1) + 1;
    run = 0;
  }
  return records;
}

std::vector<std::uint8_t> record_positions(std::span<const std::uint8_t> compressible_flags) {
  std::vector<std::uint8_t> stored(compressible_flags.size(), 0);
  std::size_t run_start = 0;
  for (std::size_t i = 0; i < compressible_flags.size(); ++i) {
    if (compressible_flags[i] != 0) continue;
    // Every 16th vector of the run before a stored vector becomes a pad.
    for (std::size_t p = run_start + kMaxRun; p < i; p += kMaxRun + 1) stored[p] = 1;
    stored[i] = 1;
    run_start = i + 1;
  }
  return stored;
}

std::size_t packed_nibbles(const CompressedPlane& cp) noexcept { return cp.record_count() * (kVectorLen + 1); }

std::vector<std::uint8_t> encode_compressed(const CompressedPlane& cp) {
  ByteWriter w;
  w.magic("AQSC");
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(cp.orientation));
  w.u8(cp.is_signed ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(cp.shift));
  w.u8(static_cast<std::uint8_t>(cp.skip_value & 0x0F));
  w.u64(cp.rows);
  w.u64(cp.cols);
  w.u64(cp.vectors_per_stream);
  w.u64(cp.streams.size());
  for (const auto& s : cp.streams) {
    w.u32(static_cast<std::uint32_t>(s.records.size()));
    w.u32(s.trailing_run);
    for (const auto& rec : s.records) {
      w.u8(rec.run);
      w.bytes(pack_nibbles(rec.vector));
    }
  }
  return std::move(w).take();
}

CompressedPlane decode_compressed(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("AQSC");
  if (r.u8() != 1) throw Error(ErrorCode::kBadVersion, "unsupported compressed-plane version");
  CompressedPlane cp;
  const auto orientation = r.u8();
  if (orientation > 1) throw Error(ErrorCode::kMalformedStream, "unknown orientation");
  cp.orientation = static_cast<Orientation>(orientation);
  cp.is_signed = r.u8() != 0;
  cp.shift = r.u8();
  auto skip = static_cast<std::int8_t>(r.u8() & 0x0F);
  if (cp.is_signed && skip >= 8) skip = static_cast<std::int8_t>(skip - 16);
  cp.skip_value = skip;
  cp.rows = r.dim();
  cp.cols = r.dim();
  checked_area(cp.rows, cp.cols);
  cp.vectors_per_stream = r.dim();
  const std::size_t streams = r.dim();
  const Geometry g = geometry(cp.rows, cp.cols, cp.orientation);
  if (streams != g.streams || cp.vectors_per_stream != vectors_for(g.axis_len)) {
    throw Error(ErrorCode::kMalformedStream, "stream geometry does not match plane shape");
  }
  cp.streams.resize(streams);
  for (auto& s : cp.streams) {
    const std::uint32_t n = r.u32();
    s.trailing_run = r.u32();
    if (n > cp.vectors_per_stream) throw Error(ErrorCode::kMalformedStream, "too many records");
    s.records.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      RleRecord rec;
      rec.run = r.u8();
      if (rec.run > kMaxRun) throw Error(ErrorCode::kMalformedStream, "run exceeds 15");
      const auto nibs = unpack_nibbles(r.take(2), kVectorLen, cp.is_signed);
      std::copy(nibs.begin(), nibs.end(), rec.vector.begin());
      s.records.push_back(rec);
    }
  }
  r.expect_end();
  // Validate run bookkeeping up front so a bad file fails at load time.
  (void)decompress_plane(cp);
  return cp;
}

CompressedOperand compress_operand(const SlicedMatrix& sm, std::int8_t r) {
  CompressedOperand op;
  op.rows = sm.rows;
  op.cols = sm.cols;
  op.source_bits = sm.source_bits;
  op.scheme = sm.scheme;
  if (sm.has_ho_plane()) {
    op.ho = compress_plane(sm.ho(), op.orientation(), r);
    op.lo_planes.assign(sm.planes.begin() + 1, sm.planes.end());
  } else {
    op.lo_planes = sm.planes;
  }
  return op;
}

SlicedMatrix decompress_operand(const CompressedOperand& op) {
  SlicedMatrix sm{op.rows, op.cols, {}, op.source_bits, op.scheme};
  if (op.ho) sm.planes.push_back(decompress_plane(*op.ho));
  sm.planes.insert(sm.planes.end(), op.lo_planes.begin(), op.lo_planes.end());
  return sm;
}

std::vector<std::uint8_t> encode_operand(const CompressedOperand& op) {
  ByteWriter w;
  w.magic("AQSO");
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(op.scheme));
  w.u8(static_cast<std::uint8_t>(op.source_bits));
  w.u8(op.ho ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(op.lo_planes.size()));
  w.u64(op.rows);
  w.u64(op.cols);
  if (op.ho) {
    const auto blob = encode_compressed(*op.ho);
    w.u64(blob.size());
    w.bytes(blob);
  }
  for (const auto& p : op.lo_planes) {
    w.u8(p.is_signed ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(p.shift));
    w.bytes(pack_nibbles(p.nibbles));
  }
  return std::move(w).take();
}

CompressedOperand decode_operand(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("AQSO");
  if (r.u8() != 1) throw Error(ErrorCode::kBadVersion, "unsupported compressed-operand version");
  CompressedOperand op;
  const auto scheme = r.u8();
  if (scheme > 2) throw Error(ErrorCode::kMalformedStream, "unknown slice scheme");
  op.scheme = static_cast<SliceScheme>(scheme);
  op.source_bits = r.u8();
  const bool has_ho = r.u8() != 0;
  const std::size_t lo_count = r.u8();
  op.rows = r.dim();
  op.cols = r.dim();
  const std::size_t count = checked_area(op.rows, op.cols);
  if (has_ho) {
    const auto len = r.u64();
    if (len > bytes.size()) throw Error(ErrorCode::kTruncated, "HO blob length exceeds input");
    op.ho = decode_compressed(r.take(static_cast<std::size_t>(len)));
    if (op.ho->rows != op.rows || op.ho->cols != op.cols || op.ho->orientation != op.orientation()) {
      throw Error(ErrorCode::kMalformedStream, "HO plane does not match operand");
    }
  }
  for (std::size_t i = 0; i < lo_count; ++i) {
    SlicePlane p;
    p.rows = op.rows;
    p.cols = op.cols;
    p.is_signed = r.u8() != 0;
    p.shift = r.u8();
    p.nibbles = unpack_nibbles(r.take((count + 1) / 2), count, p.is_signed);
    op.lo_planes.push_back(std::move(p));
  }
  r.expect_end();
  return op;
}

}  // namespace aqs
