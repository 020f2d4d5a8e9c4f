"""Input validation helpers shared by the estimators and the free functions."""

from __future__ import annotations

import math
import numbers

import numpy as np


def check_finite(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    return float(value)


def check_positive(value, name, *, allow_zero=False, allow_inf=False):
    if allow_inf and value == math.inf:
        return math.inf
    value = check_finite(value, name)
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return value


def check_fraction(value, name, *, allow_zero=False):
    """Return ``value`` as float if it lies in (0, 1] (or [0, 1] with ``allow_zero``)."""
    value = check_finite(value, name)
    low_ok = value >= 0 if allow_zero else value > 0
    if not (low_ok and value <= 1):
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must lie in {interval}, got {value!r}")
    return value


def check_count(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_complex_1d(x, name="x", *, min_length=1):
    """Coerce ``x`` to a 1-D complex128 array."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"{name} must have at least {min_length} samples, got {arr.size}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_real_1d(x, name="x", *, min_length=1):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"{name} must have at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_length(a, b, names=("a", "b")):
    if len(a) != len(b):
        raise ValueError(f"{names[0]} and {names[1]} differ in length ({len(a)} != {len(b)})")


def frozen(arr):
    """Return a read-only view so value objects stay immutable."""
    arr = np.asarray(arr)
    view = arr.view()
    view.flags.writeable = False
    return view
