#include "aqs/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <type_traits>

namespace aqs {
namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

template <typename T>
void put_element(std::vector<std::uint8_t>& out, T v) {
  if constexpr (std::is_same_v<T, float>) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  } else if constexpr (std::is_same_v<T, std::int32_t>) {
    const auto bits = static_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  } else {
    out.push_back(static_cast<std::uint8_t>(v));
  }
}

template <typename T>
T get_element(const std::uint8_t* p) {
  if constexpr (sizeof(T) == 4) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<T>(bits);
  } else {
    return std::bit_cast<T>(p[0]);
  }
}

template <typename T>
AnyMatrix decode_payload(std::size_t rows, std::size_t cols, std::span<const std::uint8_t> payload) {
  Matrix<T> m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = get_element<T>(payload.data() + i * sizeof(T));
  return m;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::uint8_t> encode_matrix(const AnyMatrix& m) {
  std::vector<std::uint8_t> out;
  const auto dtype = dtype_of(m);
  out.reserve(kTensorHeaderBytes + rows_of(m) * cols_of(m) * dtype_size(dtype));
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  out.push_back(kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(2);
  out.push_back(0);
  put_u64(out, rows_of(m));
  put_u64(out, cols_of(m));
  std::visit(
      [&](const auto& x) {
        for (auto v : x.data) put_element(out, v);
      },
      m);
  return out;
}

AnyMatrix decode_matrix(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::kTruncated, "header shorter than 8 bytes");
  if (!std::equal(std::begin(kTensorMagic), std::end(kTensorMagic), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "expected \"AQST\"");
  }
  if (bytes[4] != kTensorVersion) {
    throw Error(ErrorCode::kBadVersion, "unsupported version " + std::to_string(bytes[4]));
  }
  const std::uint8_t code = bytes[5];
  if (code > 3) throw Error(ErrorCode::kInvalidArgument, "unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  if (bytes[6] != 2) throw Error(ErrorCode::kInvalidArgument, "only 2-D tensors are supported");
  if (bytes[7] != 0) throw Error(ErrorCode::kMalformedStream, "nonzero header pad byte");
  if (bytes.size() < kTensorHeaderBytes) throw Error(ErrorCode::kTruncated, "dims truncated");

  const std::uint64_t rows = get_u64(bytes.subspan(8));
  const std::uint64_t cols = get_u64(bytes.subspan(16));
  const std::uint64_t elem = dtype_size(dtype);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if ((cols != 0 && rows > kMax / cols) || (rows * cols > kMax / elem) ||
      rows * cols * elem > std::numeric_limits<std::size_t>::max() - kTensorHeaderBytes) {
    throw Error(ErrorCode::kDimOverflow, std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::uint64_t payload_bytes = rows * cols * elem;
  const auto payload = bytes.subspan(kTensorHeaderBytes);
  if (payload.size() < payload_bytes) {
    throw Error(ErrorCode::kTruncated, "payload has " + std::to_string(payload.size()) + " of " +
                                           std::to_string(payload_bytes) + " bytes");
  }
  if (payload.size() > payload_bytes) throw Error(ErrorCode::kMalformedStream, "trailing bytes after payload");

  switch (dtype) {
    case DType::kFloat32: return decode_payload<float>(rows, cols, payload);
    case DType::kInt32: return decode_payload<std::int32_t>(rows, cols, payload);
    case DType::kUInt8: return decode_payload<std::uint8_t>(rows, cols, payload);
    case DType::kInt8: return decode_payload<std::int8_t>(rows, cols, payload);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown dtype");
}

FloatMatrix parse_csv(std::string_view text) {
  std::vector<float> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;

    std::size_t n = 0;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      const auto cell = trim(rest.substr(0, comma));
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::kBadCsv, "line " + std::to_string(line_no) + ": non-numeric cell '" +
                                            std::string(cell) + "'");
      }
      values.push_back(v);
      ++n;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (rows == 0) {
      cols = n;
    } else if (n != cols) {
      throw Error(ErrorCode::kBadCsv, "line " + std::to_string(line_no) + " has " + std::to_string(n) +
                                          " cells, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return FloatMatrix(rows, cols, std::move(values));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

AnyMatrix load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (path.extension() == ".csv") {
    return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return decode_matrix(bytes);
}

void save_matrix(const AnyMatrix& m, const std::filesystem::path& path) { write_file(path, encode_matrix(m)); }

AnyMatrix narrow_codes(const IntMatrix& m) {
  const auto [lo, hi] = m.empty() ? std::pair{0, 0}
                                  : std::pair{*std::min_element(m.data.begin(), m.data.end()),
                                              *std::max_element(m.data.begin(), m.data.end())};
  if (lo >= 0 && hi <= 255) {
    Matrix<std::uint8_t> out(m.rows, m.cols);
    std::transform(m.data.begin(), m.data.end(), out.data.begin(), [](auto v) { return static_cast<std::uint8_t>(v); });
    return out;
  }
  if (lo >= -128 && hi <= 127) {
    Matrix<std::int8_t> out(m.rows, m.cols);
    std::transform(m.data.begin(), m.data.end(), out.data.begin(), [](auto v) { return static_cast<std::int8_t>(v); });
    return out;
  }
  return m;
}

}  // namespace aqs
