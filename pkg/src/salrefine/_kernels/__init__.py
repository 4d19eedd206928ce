"""Metric kernels: the compiled extension when importable, NumPy otherwise.

Set ``SALREFINE_PURE_PYTHON=1`` to force the NumPy versions.
"""

import importlib
import os

from . import fallback

KERNEL_NAMES = ("threshold_counts", "abs_error_sum", "masked_mean_std", "block_ssim")


def load_backend(name):
    if name == "python":
        return fallback
    if name == "cython":
        return importlib.import_module(f"{__name__}._metrics_ext")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = ["python"]
    try:
        load_backend("cython")
        out.append("cython")
    except ImportError:
        pass
    return out


if os.environ.get("SALREFINE_PURE_PYTHON"):
    BACKEND = "python"
else:
    BACKEND = "cython" if "cython" in available_backends() else "python"

_impl = load_backend(BACKEND)
threshold_counts = _impl.threshold_counts
abs_error_sum = _impl.abs_error_sum
masked_mean_std = _impl.masked_mean_std
block_ssim = _impl.block_ssim
