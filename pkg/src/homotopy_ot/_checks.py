"""Input validation shared by the numerical modules."""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


def as_cloud(values, name: str = "cloud") -> np.ndarray:
    """Return ``values`` as a finite float array of shape (d, n), d, n >= 1."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D (d, n) array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have d >= 1 and n >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_cloud_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = as_cloud(x, "x")
    y = as_cloud(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"point clouds differ in shape: {x.shape} vs {y.shape}")
    return x, y


def as_square(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr
