"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionError, DomainError


def check_points(X, *, name="X", dim=None):
    """Return ``X`` as a finite 2-D float64 array of shape (n_points, dim)."""
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True,
                        ensure_min_samples=1, input_name=name)
    except ValueError as exc:
        msg = str(exc)
        if "NaN" in msg or "infinity" in msg:
            raise DomainError(msg) from exc
        raise DimensionError(msg) from exc
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(f"{name} has dimension {X.shape[1]}, expected {dim}")
    return X


def check_point(y, *, dim=None, name="y"):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if dim is not None and y.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {y.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(y)):
        raise DomainError(f"{name} contains non-finite entries")
    return y


def check_vector(v, *, n=None, name="vector", nonnegative=False):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        v = v.reshape(-1)
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} contains non-finite entries")
    if nonnegative and np.any(v < 0):
        raise DomainError(f"{name} must be nonnegative")
    return v


def check_norm(p):
    """Validate an l_p exponent; ``inf`` is accepted."""
    p = float(p)
    if math.isnan(p) or p < 1:
        raise DomainError(f"norm exponent p must satisfy p >= 1, got {p}")
    return p
