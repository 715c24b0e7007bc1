#include "aqs/matrix.hpp"

#include <cmath>
#include <type_traits>

namespace aqs {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kBadVersion: return "BadVersion";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kDimOverflow: return "DimOverflow";
    case ErrorCode::kBadCsv: return "BadCsv";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kMalformedStream: return "MalformedStream";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32:
    case DType::kInt32: return 4;
    case DType::kUInt8:
    case DType::kInt8: return 1;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown dtype");
}

std::string to_string(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "float32";
    case DType::kInt32: return "int32";
    case DType::kUInt8: return "uint8";
    case DType::kInt8: return "int8";
  }
  return "unknown";
}

DType dtype_of(const AnyMatrix& m) { return static_cast<DType>(m.index()); }

std::size_t rows_of(const AnyMatrix& m) {
  return std::visit([](const auto& x) { return x.rows; }, m);
}

std::size_t cols_of(const AnyMatrix& m) {
  return std::visit([](const auto& x) { return x.cols; }, m);
}

FloatMatrix to_float(const AnyMatrix& m) {
  return std::visit(
      [](const auto& x) {
        FloatMatrix out(x.rows, x.cols);
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = static_cast<float>(x.data[i]);
        return out;
      },
      m);
}

IntMatrix to_int(const AnyMatrix& m) {
  return std::visit(
      [](const auto& x) -> IntMatrix {
        using T = typename std::decay_t<decltype(x)>::value_type;
        if constexpr (std::is_floating_point_v<T>) {
          throw Error(ErrorCode::kInvalidArgument, "expected an integer matrix, got float32");
        } else {
          IntMatrix out(x.rows, x.cols);
          for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = static_cast<std::int32_t>(x.data[i]);
          return out;
        }
      },
      m);
}

}  // namespace aqs
