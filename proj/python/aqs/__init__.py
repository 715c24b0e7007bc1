"""Python bindings for the aqs core library."""

from ._aqs import (
    AqsError,
    aqs_gemm,
    calibrate,
    default_config,
    dense_oracle,
    quantize_asymmetric,
    quantize_symmetric,
    simulate_synthetic,
    slice_planes,
    zpm_adjust,
)

__all__ = [
    "AqsError",
    "aqs_gemm",
    "calibrate",
    "default_config",
    "dense_oracle",
    "quantize_asymmetric",
    "quantize_symmetric",
    "simulate_synthetic",
    "slice_planes",
    "zpm_adjust",
]
