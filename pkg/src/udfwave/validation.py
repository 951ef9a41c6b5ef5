"""Input validation helpers shared by the estimators and the functional API."""
from __future__ import annotations

import os

import numpy as np

from .errors import InvalidParameter, ShapeMismatch


def check_finite(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"{name} contains non-finite values")
    return arr


def check_positive(name: str, value) -> float:
    value = float(value)
    if not value > 0:
        raise InvalidParameter(f"{name} must be positive, got {value!r}")
    return value


def check_positive_int(name: str, value) -> int:
    ivalue = int(value)
    if ivalue != value or ivalue <= 0:
        raise InvalidParameter(f"{name} must be a positive integer, got {value!r}")
    return ivalue


def check_in_range(name: str, value, lo, hi, *, lo_open=False, hi_open=False) -> float:
    value = float(value)
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    if not (ok_lo and ok_hi):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise InvalidParameter(f"{name} must lie in {lb}{lo}, {hi}{rb}, got {value!r}")
    return value


def check_volume_list(name: str, volumes) -> list:
    """Validate a non-empty list of UdfVolume with a common resolution."""
    volumes = list(volumes)
    if not volumes:
        raise InvalidParameter(f"{name} must contain at least one volume")
    res = volumes[0].resolution
    for v in volumes[1:]:
        if v.resolution != res:
            raise ShapeMismatch(
                f"{name}: mixed resolutions {res} vs {v.resolution}"
            )
    return volumes


def check_array_list(name: str, arrays, *, ndim=None) -> list[np.ndarray]:
    """Validate a non-empty list of equally shaped float arrays."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    if not arrays:
        raise InvalidParameter(f"{name} must contain at least one array")
    shape = arrays[0].shape
    for a in arrays:
        if a.shape != shape:
            raise ShapeMismatch(f"{name}: mixed shapes {shape} vs {a.shape}")
        if ndim is not None and a.ndim != ndim:
            raise ShapeMismatch(f"{name}: expected {ndim}-d arrays, got {a.ndim}-d")
        if not np.all(np.isfinite(a)):
            raise InvalidParameter(f"{name} contains non-finite values")
    return arrays


def thread_count() -> int | None:
    """Thread budget from UDFWAVE_THREADS, or None for the runtime default."""
    raw = os.environ.get("UDFWAVE_THREADS")
    if raw is None or not raw.strip():
        return None
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameter(f"UDFWAVE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise InvalidParameter("UDFWAVE_THREADS must be >= 1")
    return n


def apply_thread_budget() -> None:
    """Cap numba's thread pool when UDFWAVE_THREADS is set."""
    n = thread_count()
    if n is None:
        return
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
