#include <cstring>
#include <filesystem>
#include <random>

#include "aqs/tensor_io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aqs;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("aqs_tio_" + name);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aqs::Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("tensor_io") {
  TEST_CASE("2x2 float32 file round-trips") {
    const FloatMatrix m(2, 2, std::vector<float>{1, 2, 3, 4});
    const auto path = temp_path("f22.aqst");
    save_matrix(m, path);
    const AnyMatrix back = load_matrix(path);
    REQUIRE(dtype_of(back) == DType::kFloat32);
    CHECK(std::get<FloatMatrix>(back) == m);
    std::filesystem::remove(path);
  }

  TEST_CASE("header layout and exact byte length") {
    // 4 magic + version + dtype + ndim + pad + two u64 dims = 24 header bytes.
    const auto f = encode_matrix(FloatMatrix(1, 1));
    CHECK(f.size() == 28);
    CHECK(kTensorHeaderBytes == 24);
    CHECK(std::memcmp(f.data(), "AQST", 4) == 0);
    CHECK(f[4] == 1);
    CHECK(f[5] == 0);
    CHECK(f[6] == 2);
    CHECK(f[7] == 0);
    CHECK(f[8] == 1);
    CHECK(f[16] == 1);

    const auto u = encode_matrix(Matrix<std::uint8_t>(2, 3, std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6}));
    CHECK(u.size() == 24 + 6);
    CHECK(u[5] == 2);
    CHECK(u[8] == 2);
    CHECK(u[16] == 3);
    CHECK(u[24] == 1);
    CHECK(u[29] == 6);
  }

  TEST_CASE("payload is little-endian") {
    const auto f = encode_matrix(FloatMatrix(1, 1, std::vector<float>{1.0f}));
    CHECK(f[24] == 0x00);
    CHECK(f[25] == 0x00);
    CHECK(f[26] == 0x80);
    CHECK(f[27] == 0x3F);
    const auto i = encode_matrix(IntMatrix(1, 1, std::vector<std::int32_t>{-2}));
    CHECK(i[24] == 0xFE);
    CHECK(i[27] == 0xFF);
  }

  TEST_CASE("rejects malformed headers with distinct errors") {
    auto good = encode_matrix(IntMatrix(2, 2, std::vector<std::int32_t>{1, 2, 3, 4}));

    auto bad = good;
    std::memcpy(bad.data(), "XXXX", 4);
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kBadMagic);

    bad = good;
    bad[4] = 2;
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kBadVersion);

    bad = good;
    bad.resize(bad.size() - 1);
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kTruncated);

    bad = good;
    bad.resize(12);
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kTruncated);

    bad = good;
    for (int i = 8; i < 24; ++i) bad[static_cast<std::size_t>(i)] = 0xFF;
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kDimOverflow);

    bad = good;
    bad.push_back(0);
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kMalformedStream);

    bad = good;
    bad[5] = 9;
    CHECK(code_of([&] { decode_matrix(bad); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("write(load(f)) is byte-identical for random matrices") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(0, 9);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int t = 0; t < 100; ++t) {
      const std::size_t r = static_cast<std::size_t>(dim(rng));
      const std::size_t c = static_cast<std::size_t>(dim(rng));
      const auto dtype = static_cast<std::uint8_t>(t % 4);
      std::vector<std::uint8_t> f = {'A', 'Q', 'S', 'T', 1, dtype, 2, 0};
      for (int i = 0; i < 8; ++i) f.push_back(static_cast<std::uint8_t>(i == 0 ? r : 0));
      for (int i = 0; i < 8; ++i) f.push_back(static_cast<std::uint8_t>(i == 0 ? c : 0));
      const std::size_t payload = r * c * dtype_size(static_cast<DType>(dtype));
      for (std::size_t i = 0; i < payload; ++i) f.push_back(static_cast<std::uint8_t>(byte(rng)));
      if (dtype == 0) {
        // Keep float payloads free of NaNs so element equality is meaningful.
        for (std::size_t i = 24 + 3; i < f.size(); i += 4) f[i] &= 0x3F;
      }
      CHECK(encode_matrix(decode_matrix(f)) == f);
    }
  }

  TEST_CASE("csv ingestion") {
    const auto m = parse_csv("1, 2.5,-3\n\n4,5,6e-1\r\n");
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    CHECK(m(0, 1) == 2.5f);
    CHECK(m(1, 2) == doctest::Approx(0.6f));
    CHECK(code_of([] { parse_csv("1,2\n3,abc\n"); }) == ErrorCode::kBadCsv);
    CHECK(code_of([] { parse_csv("1,2\n3\n"); }) == ErrorCode::kBadCsv);
    CHECK(code_of([] { parse_csv("1,,2\n"); }) == ErrorCode::kBadCsv);
    CHECK(parse_csv("").empty());

    const auto path = temp_path("in.csv");
    write_file(path, std::vector<std::uint8_t>{'7', ',', '8', '\n'});
    const auto loaded = load_matrix(path);
    CHECK(dtype_of(loaded) == DType::kFloat32);
    CHECK(std::get<FloatMatrix>(loaded) == FloatMatrix(1, 2, std::vector<float>{7, 8}));
    std::filesystem::remove(path);
  }

  TEST_CASE("missing file is an I/O error") {
    CHECK(code_of([] { load_matrix("/nonexistent/dir/x.aqst"); }) == ErrorCode::kIo);
  }

  TEST_CASE("narrow_codes picks the smallest dtype") {
    CHECK(dtype_of(narrow_codes(IntMatrix(1, 2, std::vector<std::int32_t>{0, 255}))) == DType::kUInt8);
    CHECK(dtype_of(narrow_codes(IntMatrix(1, 2, std::vector<std::int32_t>{-128, 127}))) == DType::kInt8);
    CHECK(dtype_of(narrow_codes(IntMatrix(1, 2, std::vector<std::int32_t>{-1, 200}))) == DType::kInt32);
    const IntMatrix codes(1, 3, std::vector<std::int32_t>{-5, 0, 7});
    CHECK(to_int(narrow_codes(codes)) == codes);
    CHECK_THROWS_AS(to_int(FloatMatrix(1, 1)), Error);
  }

  TEST_CASE("shape mismatch on construction") {
    CHECK(code_of([] { FloatMatrix(2, 2, std::vector<float>{1, 2, 3}); }) == ErrorCode::kShapeMismatch);
  }
}
