import numpy as np
import pytest

import aqs


def random_layer(seed, m=24, k=40, n=20):
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.1, size=(m, k)).astype(np.float32)
    x = rng.normal(0.2, 0.3, size=(k, n)).astype(np.float32)
    return w, x


def test_gemm_matches_numpy_reference():
    w, x = random_layer(0)
    wq, pw = aqs.quantize_symmetric(w, bits=7)
    cal = aqs.calibrate([x])
    xq, px = aqs.quantize_asymmetric(x, params=cal["params"])
    assert wq.dtype == np.int32 and xq.min() >= 0 and xq.max() <= 255

    acc5, c5 = aqs.aqs_gemm(wq, pw, xq, px, mode="eq5")
    acc6, c6 = aqs.aqs_gemm(wq, pw, xq, px, mode="eq6")
    ref = aqs.dense_oracle(wq, pw, xq, px)
    np.testing.assert_array_equal(acc5, ref)
    np.testing.assert_array_equal(acc6, ref)
    assert c5["mults"] == c6["mults"]

    # With type-1 slicing the engine sees the codes unchanged.
    if px["dbs_type"] == 1:
        np.testing.assert_array_equal(ref, wq.astype(np.int64) @ xq.astype(np.int64))


def test_slicing_round_trip():
    codes = np.arange(-64, 64, dtype=np.int32).reshape(1, -1)
    _, params = aqs.quantize_symmetric(codes.astype(np.float32), bits=7)
    planes, back = aqs.slice_planes(codes, params)
    assert [shift for _, shift in planes] == [3, 0]
    np.testing.assert_array_equal(back, codes)
    hi = planes[0][0]
    assert np.all(hi[0, 56:72] == 0)  # values -8..7 have a zero HO slice


def test_zpm_centres_zero_point():
    params = {"scheme": "asymmetric", "scale": 0.1, "zero_point": 161, "bit_width": 8, "dbs_type": 1, "lo_width": 4}
    adj = aqs.zpm_adjust(params)
    assert adj["zero_point"] == 168
    assert adj["skip_value"] == 10


def test_simulator_sparsity_helps():
    dense = aqs.simulate_synthetic(256, 256, 256, 0.0, 0.0)
    sparse = aqs.simulate_synthetic(256, 256, 256, 0.9, 0.9)
    assert sparse["cycles"] < dense["cycles"]
    assert sparse["counters"]["dram_nibbles"] < dense["counters"]["dram_nibbles"]
    cfg = aqs.default_config()
    assert cfg["TM"] == 64


def test_errors_raise():
    with pytest.raises(aqs.AqsError):
        aqs.quantize_symmetric(np.full((2, 2), np.nan, np.float32))
    with pytest.raises(ValueError):
        aqs.simulate_synthetic(8, 8, 8, 1.5, 0.0)
