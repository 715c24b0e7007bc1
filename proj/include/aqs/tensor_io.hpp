#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "aqs/matrix.hpp"

namespace aqs {

// AQST layout, little-endian throughout:
//   "AQST" | version u8 (=1) | dtype u8 | ndim u8 (=2) | pad u8 (=0) | ndim x u64 dims | payload
inline constexpr char kTensorMagic[4] = {'A', 'Q', 'S', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 4 + 1 + 1 + 1 + 1 + 2 * 8;

std::vector<std::uint8_t> encode_matrix(const AnyMatrix& m);
AnyMatrix decode_matrix(std::span<const std::uint8_t> bytes);

// CSV: comma-separated, one row per line, no header. Always float32.
FloatMatrix parse_csv(std::string_view text);

// Dispatches on extension: ".csv" is parsed as text, anything else as AQST.
AnyMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const AnyMatrix& m, const std::filesystem::path& path);

// Narrows int32 codes to the smallest listed dtype that holds them
// (uint8 for non-negative values below 256, int8 for [-128, 127], else int32).
AnyMatrix narrow_codes(const IntMatrix& m);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace aqs
