#include <cmath>
#include <random>
#include <vector>

#include "aqs/quantizer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aqs;

namespace {

// Batch whose fitted zero point is `zp` with real 0 at the centre of a
// Gaussian of `sigma_codes` quantized units. Scale is a power of two so the
// fitted zero point is exact.
using test::centred_batch;

CalibStats two_point_stats(int centre, int offset) {
  CalibStats s;
  s.histogram[static_cast<std::size_t>(centre - offset)] += 50;
  s.histogram[static_cast<std::size_t>(centre + offset)] += 50;
  s.count = 100;
  return s;
}

QuantParams asym(std::int32_t zp, int l) {
  QuantParams p;
  p.zero_point = zp;
  p.lo_width = l;
  p.dbs_type = l - 3;
  return p;
}

}  // namespace

TEST_SUITE("quantizer") {
  TEST_CASE("round half to even") {
    CHECK(round_half_even(0.5) == 0.0);
    CHECK(round_half_even(1.5) == 2.0);
    CHECK(round_half_even(2.5) == 2.0);
    CHECK(round_half_even(-0.5) == 0.0);
    CHECK(round_half_even(-63.5) == -64.0);
    CHECK(round_half_even(-64.5) == -64.0);
    CHECK(round_half_even(2.4999) == 2.0);
    CHECK(round_half_even(-2.6) == -3.0);
  }

  TEST_CASE("symmetric 7-bit tie case clips at the top") {
    const auto q = quantize_symmetric(FloatMatrix(1, 2, std::vector<float>{-1.0f, 1.0f}), 7);
    CHECK(q.params.scale == doctest::Approx(2.0 / 127.0));
    CHECK(q.codes.data == std::vector<std::int32_t>{-64, 63});
    CHECK(q.params.zero_point == 0);
  }

  TEST_CASE("symmetric all-zero input falls back to scale 1") {
    const auto q = quantize_symmetric(FloatMatrix(1, 3), 8);
    CHECK(q.params.scale == 1.0);
    CHECK(q.codes.data == std::vector<std::int32_t>{0, 0, 0});
  }

  TEST_CASE("asymmetric fit over [-1, 3]") {
    auto x = FloatMatrix(1, 3, std::vector<float>{-1.0f, 0.0f, 3.0f});
    const auto q = quantize_asymmetric(x, 8);
    CHECK(q.params.scale == doctest::Approx(4.0 / 255.0));
    CHECK(q.params.zero_point == 64);
    CHECK(q.codes(0, 1) == 64);
    CHECK(q.codes(0, 0) == 0);
    CHECK(q.codes(0, 2) == 255);
  }

  TEST_CASE("asymmetric identity scaling") {
    QuantParams p;
    FloatMatrix x(1, 256);
    for (int i = 0; i < 256; ++i) x.data[static_cast<std::size_t>(i)] = static_cast<float>(i) + 0.25f;
    const auto q = quantize_asymmetric(x, 8, p);
    for (int i = 0; i < 256; ++i) CHECK(q.codes.data[static_cast<std::size_t>(i)] == i);
  }

  TEST_CASE("asymmetric degenerate range falls back") {
    const auto q = quantize_asymmetric(FloatMatrix(2, 2, 3.0f), 8);
    CHECK(q.params.scale == 1.0);
    CHECK(q.params.zero_point == 0);
  }

  TEST_CASE("rejects non-finite, empty, and mismatched-scheme inputs") {
    CHECK_THROWS_AS(quantize_symmetric(FloatMatrix(1, 1, std::vector<float>{NAN}), 8), Error);
    CHECK_THROWS_AS(quantize_asymmetric(FloatMatrix(), 8), Error);
    QuantParams sym;
    sym.scheme = QuantScheme::kSymmetric;
    CHECK_THROWS_AS(quantize_asymmetric(FloatMatrix(1, 1), 8, sym), Error);
    CHECK_THROWS_AS(zpm_adjust(sym), Error);
  }

  TEST_CASE("quantized codes stay in range and dequantize within s/2") {
    std::mt19937_64 rng(11);
    for (int bits : {4, 7, 8, 10}) {
      for (int t = 0; t < 20; ++t) {
        const auto x = test::random_floats(rng, 8, 9, -3.0f, 5.0f);
        const auto qs = quantize_symmetric(x, bits);
        const auto qa = quantize_asymmetric(x, bits);
        const auto ds = dequantize(qs.codes, qs.params);
        const auto da = dequantize(qa.codes, qa.params);
        for (std::size_t i = 0; i < x.size(); ++i) {
          CHECK(qs.codes.data[i] >= qs.params.qmin());
          CHECK(qs.codes.data[i] <= qs.params.qmax());
          CHECK(qa.codes.data[i] >= 0);
          CHECK(qa.codes.data[i] <= qa.params.qmax());
          const bool sym_clipped = qs.codes.data[i] == qs.params.qmax();
          if (!sym_clipped) CHECK(std::fabs(ds.data[i] - x.data[i]) <= qs.params.scale / 2 + 1e-6);
          CHECK(std::fabs(da.data[i] - x.data[i]) <= qa.params.scale / 2 + 1e-5);
        }
      }
    }
  }

  TEST_CASE("grouped symmetric scales per 64 rows") {
    std::mt19937_64 rng(3);
    auto x = test::random_floats(rng, 130, 4, -1.0f, 1.0f);
    for (std::size_t c = 0; c < 4; ++c) x(70, c) *= 8.0f;
    const auto q = quantize_symmetric(x, 8, 64);
    REQUIRE(q.params.group_scales.size() == 3);
    CHECK(q.params.group_size == 64);
    CHECK(q.params.scale_for_row(70) > 4.0 * q.params.scale_for_row(0));
    const auto d = dequantize(q.codes, q.params);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) {
        if (q.codes(r, c) == 127) continue;
        CHECK(std::fabs(d(r, c) - x(r, c)) <= q.params.scale_for_row(r) / 2 + 1e-6);
      }
    }
  }

  TEST_CASE("fold_bias") {
    const IntMatrix w(2, 2, std::vector<std::int32_t>{1, 2, 3, 4});
    CHECK(fold_bias(w, 0, FloatMatrix(2, 1), 0.5, 0.25).data == std::vector<std::int32_t>{0, 0});
    CHECK(fold_bias(w, 10, FloatMatrix(2, 1), 1.0, 1.0).data == std::vector<std::int32_t>{-30, -70});
    CHECK(fold_bias(w, 0, FloatMatrix(2, 1, std::vector<float>{2.5f, -1.0f}), 0.5, 2.0).data ==
          std::vector<std::int32_t>{2, -1});
    CHECK_THROWS_AS(fold_bias(w, 0, FloatMatrix(3, 1), 1.0, 1.0), Error);
    CHECK_THROWS_AS(fold_bias(w, 0, FloatMatrix(2, 1, std::vector<float>{1e10f, 0.0f}), 1e-3, 1e-3), Error);
  }

  TEST_CASE("folded integer GEMM approximates the float layer") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
      const std::size_t M = 6, K = 17, N = 5;
      const auto w = test::random_floats(rng, M, K, -1.0f, 1.0f);
      const auto x = test::random_floats(rng, K, N, -0.5f, 2.0f);
      const auto b = test::random_floats(rng, M, 1, -1.0f, 1.0f);
      const auto qw = quantize_symmetric(w, 7);
      const auto qx = quantize_asymmetric(x, 8);
      const auto bh = fold_bias(qw.codes, qw.params, qx.params, b);
      const double sw = qw.params.scale;
      const double sx = qx.params.scale;
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
          double ref = b(m, 0);
          std::int64_t acc = bh(m, 0);
          double bound = sw * sx / 2;
          for (std::size_t k = 0; k < K; ++k) {
            ref += double{w(m, k)} * x(k, n);
            acc += std::int64_t{qw.codes(m, k)} * qx.codes(k, n);
            bound += std::fabs(w(m, k)) * sx / 2 + std::fabs(x(k, n)) * sw / 2 + sw * sx / 4;
          }
          CHECK(std::fabs(sw * sx * static_cast<double>(acc) - ref) <= bound + 1e-6);
        }
      }
    }
  }

  TEST_CASE("zpm_adjust examples") {
    auto p = zpm_adjust(asym(161, 4));
    CHECK(p.zero_point == 168);
    CHECK(p.skip_value == 10);
    p = zpm_adjust(asym(0, 4));
    CHECK(p.zero_point == 0);
    CHECK(p.skip_value == 0);
    p = zpm_adjust(asym(255, 4));
    CHECK(p.zero_point == 248);
    CHECK(p.skip_value == 15);
    QuantParams scaled = asym(100, 5);
    scaled.scale = 0.37;
    CHECK(zpm_adjust(scaled).scale == 0.37);
  }

  TEST_CASE("zpm skip range is exactly the HO bucket around zp' (exhaustive)") {
    for (int l = 4; l <= 6; ++l) {
      for (int zp = 1; zp <= 255; ++zp) {
        const auto p = zpm_adjust(asym(zp, l));
        const int half = 1 << (l - 1);
        CHECK(p.zero_point % (1 << l) == half);
        CHECK(p.skip_value == (p.zero_point - half) >> l);
        CHECK(zpm_adjust(p) == p);
        for (int c = 0; c < 256; ++c) {
          const bool in_range = c >= p.zero_point - half && c <= p.zero_point + half - 1;
          CHECK(((c >> l) == p.skip_value) == in_range);
        }
      }
    }
  }

  TEST_CASE("dbs_classify thresholds") {
    // Two-point distributions give an exact population std.
    CHECK(dbs_classify(two_point_stats(100, 2)) == DbsChoice{1, 4});
    CHECK(dbs_classify(two_point_stats(100, 8)) == DbsChoice{2, 5});
    CHECK(dbs_classify(two_point_stats(100, 30)) == DbsChoice{3, 6});
    CalibStats flat;
    flat.histogram[42] = 10;
    flat.count = 10;
    CHECK(flat.std() == 0.0);
    CHECK(dbs_classify(flat) == DbsChoice{1, 4});
    CHECK(DbsPolicy{}.z_score() == doctest::Approx(1.6448536).epsilon(1e-6));
    CHECK_THROWS_AS(DbsPolicy{1.0}.z_score(), Error);
  }

  TEST_CASE("dbs_classify is monotone in std") {
    for (double target : {0.5, 0.9, 0.99}) {
      int prev = 4;
      for (int off = 0; off <= 100; ++off) {
        const auto c = dbs_classify(two_point_stats(128, off), DbsPolicy{target});
        CHECK(c.lo_width >= prev);
        CHECK(c.type == c.lo_width - 3);
        prev = c.lo_width;
      }
    }
  }

  TEST_CASE("dbs estimate agrees with the Gaussian mass it stands for") {
    // A +-2^(l-1) window holds at least the target mass of a discretised
    // Gaussian whenever std * z* fits inside it.
    std::mt19937_64 rng(2);
    for (double sigma : {2.0, 4.0, 8.0, 12.0}) {
      const auto res = calibrate(std::vector<FloatMatrix>{centred_batch(rng, sigma, 120, 40000)});
      const double spread = res.stats.std() * DbsPolicy{}.z_score();
      if (spread <= 32.0) CHECK(res.skip_mass >= 0.9);
    }
  }

  TEST_CASE("codes do not depend on the slicing type") {
    std::mt19937_64 rng(9);
    const auto x = test::random_floats(rng, 4, 4, -2.0f, 2.0f);
    QuantParams p = asym(77, 4);
    p.scale = 0.02;
    const auto a = quantize_asymmetric(x, 8, p).codes;
    p.lo_width = 6;
    p.dbs_type = 3;
    CHECK(quantize_asymmetric(x, 8, p).codes == a);
  }

  TEST_CASE("calib stats merge is associative and commutative") {
    std::mt19937_64 rng(4);
    QuantParams p = asym(128, 4);
    std::vector<CalibStats> parts;
    for (int i = 0; i < 3; ++i) {
      const auto codes = test::random_ints(rng, 5, 7, 0, 255);
      parts.push_back(CalibStats::from_codes(codes, -static_cast<float>(i), static_cast<float>(i), p));
    }
    CalibStats ab = parts[0];
    ab.merge(parts[1]).merge(parts[2]);
    CalibStats bc = parts[1];
    bc.merge(parts[2]);
    CalibStats a_bc = parts[0];
    a_bc.merge(bc);
    CalibStats cba = parts[2];
    cba.merge(parts[1]).merge(parts[0]);
    CHECK(ab.histogram == a_bc.histogram);
    CHECK(ab.histogram == cba.histogram);
    CHECK(ab.count == 105);
    CHECK(ab.min == cba.min);
    CHECK(ab.max == cba.max);
    CalibStats other = CalibStats::from_codes(IntMatrix(1, 1), 0, 0, asym(3, 4));
    CHECK_THROWS_AS(ab.merge(other), Error);
  }

  TEST_CASE("calibrate: narrow Gaussian at zp=161") {
    std::mt19937_64 rng(161);
    const auto res = calibrate(std::vector<FloatMatrix>{centred_batch(rng, 3.0, 161)});
    CHECK(res.params.dbs_type == 1);
    CHECK(res.params.zero_point == 168);
    CHECK(res.params.skip_value == 10);
    CHECK(res.skip_mass >= 0.95);
    CHECK(res.skip_mass > res.skip_mass_without_zpm);
  }

  TEST_CASE("calibrate: wide Gaussian picks type 3") {
    std::mt19937_64 rng(20);
    const auto wide = calibrate(std::vector<FloatMatrix>{centred_batch(rng, 20.0, 128)});
    CHECK(wide.params.dbs_type == 3);
    CHECK(wide.params.lo_width == 6);
    CHECK(wide.skip_mass >= 0.85);
    const auto w18 = calibrate(std::vector<FloatMatrix>{centred_batch(rng, 18.0, 128)});
    CHECK(w18.params.dbs_type == 3);
    CHECK(w18.skip_mass >= 0.9);
    CalibrationOptions strict;
    strict.dbs.target_sparsity = 0.99;
    CHECK(calibrate(std::vector<FloatMatrix>{centred_batch(rng, 9.0, 128)}, strict).params.dbs_type == 3);
  }

  TEST_CASE("calibrate: constant batch") {
    const auto res = calibrate(std::vector<FloatMatrix>{FloatMatrix(3, 3, 0.7f)});
    CHECK(res.params.dbs_type == 1);
    CHECK(res.params.scale == 1.0);
    CHECK(res.params.zero_point == 0);
    CHECK(res.stats.std() == 0.0);
  }

  TEST_CASE("calibrate: batches may be split arbitrarily") {
    std::mt19937_64 rng(8);
    const auto all = centred_batch(rng, 5.0, 90, 3000);
    std::vector<FloatMatrix> parts(3, FloatMatrix(1, 1000));
    for (std::size_t i = 0; i < 3000; ++i) parts[i / 1000].data[i % 1000] = all.data[i];
    const auto whole = calibrate(std::vector<FloatMatrix>{all});
    const auto split = calibrate(parts);
    CHECK(whole.params == split.params);
    CHECK(whole.stats.histogram == split.stats.histogram);
  }

  TEST_CASE("calibrate: ZPM and DBS switches") {
    std::mt19937_64 rng(12);
    const auto batch = centred_batch(rng, 3.0, 161);
    CalibrationOptions no_zpm;
    no_zpm.enable_zpm = false;
    const auto r = calibrate(std::vector<FloatMatrix>{batch}, no_zpm);
    CHECK(r.params.zero_point == 161);
    CHECK(r.params.skip_value == 10);
    CalibrationOptions no_dbs;
    no_dbs.enable_dbs = false;
    const auto wide = calibrate(std::vector<FloatMatrix>{centred_batch(rng, 20.0, 161)}, no_dbs);
    CHECK(wide.params.lo_width == 4);
    CHECK_THROWS_AS(calibrate(std::vector<FloatMatrix>{}), Error);
  }
}
