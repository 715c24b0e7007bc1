#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aqs/error.hpp"

namespace aqs {

// Row-major dense 2-D matrix. Every tensor in the pipeline is viewed as one.
template <typename T>
struct Matrix {
  using value_type = T;

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
      throw Error(ErrorCode::kShapeMismatch, "data length " + std::to_string(data.size()) +
                                                 " != " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using FloatMatrix = Matrix<float>;
// Quantized integer codes are carried as int32 regardless of bit-width; the
// on-disk dtype is chosen by the writer.
using IntMatrix = Matrix<std::int32_t>;

enum class DType : std::uint8_t { kFloat32 = 0, kInt32 = 1, kUInt8 = 2, kInt8 = 3 };

std::size_t dtype_size(DType dtype);
std::string to_string(DType dtype);

using AnyMatrix = std::variant<Matrix<float>, Matrix<std::int32_t>, Matrix<std::uint8_t>, Matrix<std::int8_t>>;

DType dtype_of(const AnyMatrix& m);
std::size_t rows_of(const AnyMatrix& m);
std::size_t cols_of(const AnyMatrix& m);

// Conversions used at file boundaries. to_int rejects float input.
FloatMatrix to_float(const AnyMatrix& m);
IntMatrix to_int(const AnyMatrix& m);

}  // namespace aqs
