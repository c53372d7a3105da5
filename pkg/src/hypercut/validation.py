"""Input validation helpers shared by the estimator and pipeline."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateGraphError, DimensionError, InvalidFeatureError


def check_feature_matrix(features, *, name: str = "features") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising InvalidFeatureError otherwise."""
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidFeatureError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidFeatureError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidFeatureError(f"{name} contains non-finite values")
    return arr


def check_weight_matrix(weights, *, n_nodes: int | None = None,
                        sym_tol: float = 1e-12) -> np.ndarray:
    """Validate a symmetric nonnegative edge-weight matrix."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError(f"weight matrix must be square, got shape {w.shape}")
    if n_nodes is not None and w.shape[0] != n_nodes:
        raise DimensionError(
            f"weight matrix has {w.shape[0]} nodes, expected {n_nodes}")
    if not np.isfinite(w).all():
        raise InvalidFeatureError("weight matrix contains non-finite values")
    if np.abs(w - w.T).max(initial=0.0) > sym_tol:
        raise DimensionError("weight matrix is not symmetric")
    if w.min(initial=0.0) < 0.0:
        raise DimensionError("weight matrix has negative entries")
    return w


def check_positive_degrees(weights: np.ndarray) -> np.ndarray:
    """Return row sums, raising DegenerateGraphError on any zero-degree node."""
    degrees = weights.sum(axis=1)
    if (degrees <= 0.0).any():
        bad = int(np.argmin(degrees))
        raise DegenerateGraphError(f"node {bad} has zero degree")
    return degrees


def check_vector(x, *, min_len: int = 1, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < min_len:
        raise DimensionError(f"{name} needs at least {min_len} entries, got {arr.size}")
    return arr
