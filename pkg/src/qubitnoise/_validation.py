"""Small argument checks shared by the numerical modules."""

import math

import numpy as np

from .errors import DomainError


def check_positive(value, name, *, strict=True):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    if strict and value <= 0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return value


def check_finite(value, name):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def as_float_array(values, name, *, min_len=1, finite=True):
    """Return ``values`` as a 1-D float array, rejecting NaN/inf."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_len:
        raise DomainError(f"{name} needs at least {min_len} values, got {arr.size}")
    if finite and not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains NaN or inf")
    return arr


def check_increasing(arr, name):
    if np.any(np.diff(arr) <= 0):
        bad = int(np.argmax(np.diff(arr) <= 0)) + 1
        raise DomainError(f"{name} must be strictly increasing (violated at index {bad})")
    return arr
