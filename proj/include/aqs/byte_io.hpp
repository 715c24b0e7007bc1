#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aqs/error.hpp"

namespace aqs {

// Little-endian writer/reader shared by the binary artifact formats.
class ByteWriter {
 public:
  void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : buf_(b) {}

  void expect_magic(std::string_view m) {
    if (buf_.size() - pos_ < m.size()) throw Error(ErrorCode::kTruncated, "missing magic");
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (buf_[pos_ + i] != static_cast<std::uint8_t>(m[i])) {
        throw Error(ErrorCode::kBadMagic, "expected \"" + std::string(m) + "\"");
      }
    }
    pos_ += m.size();
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  // A u64 dimension that must also fit in the remaining input as a count.
  std::size_t dim() {
    const auto v = u64();
    if (v > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::kDimOverflow, std::to_string(v));
    return static_cast<std::size_t>(v);
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (buf_.size() - pos_ < n) throw Error(ErrorCode::kTruncated, "input ends early");
    auto s = buf_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_end() const {
    if (pos_ != buf_.size()) throw Error(ErrorCode::kMalformedStream, "trailing bytes");
  }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

inline std::size_t checked_area(std::size_t rows, std::size_t cols) {
  if (cols != 0 && rows > std::numeric_limits<std::uint32_t>::max() / cols) {
    throw Error(ErrorCode::kDimOverflow, std::to_string(rows) + "x" + std::to_string(cols));
  }
  return rows * cols;
}

}  // namespace aqs
