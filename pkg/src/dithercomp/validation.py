"""Input validation helpers shared across the package.

All raise ValueError (or TypeError for wrong types) with the offending
name and value in the message, so callers can surface contract
violations uniformly.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_unit",
    "check_n_pulses",
    "check_bits",
    "check_matrix",
    "check_in_range",
]


def check_unit(x, name: str = "x") -> float:
    """Validate a scalar in [0, 1] and return it as float."""
    x = float(x)
    if not np.isfinite(x) or x < 0.0 or x > 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def check_n_pulses(n, name: str = "n_pulses") -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"{name} must be an int, got {type(n).__name__}")
    if n < 1:
        raise ValueError(f"{name} must be >= 1, got {n}")
    return int(n)


def check_bits(bits, name: str = "bits") -> np.ndarray:
    """Validate a 0/1 array with at least one axis; returns uint8 view/copy."""
    a = np.asarray(bits)
    if a.ndim < 1:
        raise ValueError(f"{name} must have at least one axis")
    if a.size and not np.isin(np.unique(a), (0, 1)).all():
        raise ValueError(f"{name} must contain only 0s and 1s")
    return a.astype(np.uint8, copy=False)


def check_matrix(a, name: str = "a") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} must be finite")
    return m


def check_in_range(a, lo: float, hi: float, name: str = "a") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.size and (m.min() < lo or m.max() > hi):
        raise ValueError(
            f"{name} entries must lie in [{lo}, {hi}], got range "
            f"[{m.min()}, {m.max()}]"
        )
    return m
