"""Input validation helpers used by the functional core and the estimators."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import InsufficientDataError

# Durations arrive as floats; snapping to the closest small rational keeps the
# projector/resampler boundary arithmetic exact (24/25 for the default rates).
MAX_RATIO_DENOMINATOR = 10**12


def as_fraction(x, max_denominator: int = MAX_RATIO_DENOMINATOR) -> Fraction:
    """Snap a positive float to the nearest rational with a bounded denominator."""
    if x <= 0:
        raise ValueError(f"expected a positive value, got {x}")
    return Fraction(x).limit_denominator(max_denominator)


def as_bit_array(bits, length: int | None = None) -> np.ndarray:
    """Coerce to a 1-D int8 array of 0/1 values, optionally of a fixed length."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D bit sequence, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit sequence may only contain 0 and 1")
    if length is not None and arr.size != length:
        raise ValueError(f"expected {length} bits, got {arr.size}")
    return arr.astype(np.int8)


def check_power_series(series, min_length: int = 1) -> np.ndarray:
    """Validate a 1-D series of finite power values and return it as float64."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D power series, got shape {arr.shape}")
    if arr.size < min_length:
        raise InsufficientDataError(
            f"series of length {arr.size} is shorter than the required {min_length}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("power series contains non-finite values")
    return arr


def check_power_matrix(power) -> np.ndarray:
    """Validate a 2-D time x channel matrix of finite, non-negative powers."""
    arr = np.asarray(power)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D power matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("power matrix contains non-finite values")
    if arr.size and arr.min() < 0:
        raise ValueError("power matrix contains negative values")
    return arr
