"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import PointCloud


def check_points(P, name: str = "points", min_points: int = 1) -> np.ndarray:
    """Finite float array of shape (n, 3)."""
    if isinstance(P, PointCloud):
        P = P.points
    arr = check_array(P, dtype=np.float64, ensure_min_samples=min_points, input_name=name)
    if arr.shape[1] != 3:
        raise ValueError(f"{name} must have 3 columns, got {arr.shape[1]}")
    return arr


def check_values(y, n: int, name: str = "y") -> np.ndarray:
    y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), dtype=np.float64, input_name=name).ravel()
    if len(y) != n:
        raise ValueError(f"{name} has {len(y)} entries, expected {n}")
    return y


def check_int(value, name: str, minimum: int) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive(value, name: str, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_choice(value, name: str, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
