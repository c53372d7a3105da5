"""Orthonormal parameterization of the Lorentz linear transform.

The transform acts block-diagonally on hyperboloid coordinates: the time
coordinate passes through unchanged and the spatial part is multiplied
by a square matrix with orthonormal columns.  That matrix lives on the
Stiefel manifold and is trained with Riemannian SGD: project the ambient
Euclidean gradient onto the tangent space, step, then retract back to
orthonormality via QR.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, RetractionFailureError
from .manifold import LorentzPoint, reproject

#: Orthonormality drift tolerated before a matrix is considered invalid.
ORTHONORMAL_TOL = 1e-6


def init_stiefel(n: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Random orthonormal n x n matrix from the QR factor of a Gaussian draw."""
    if n < 1:
        raise DimensionError(f"matrix size must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _qr_orthonormal(rng.standard_normal((n, n)))


def check_stiefel(mat, *, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Validate column orthonormality within ``tol`` (Frobenius norm)."""
    w = np.asarray(mat, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {w.shape}")
    drift = np.linalg.norm(w.T @ w - np.eye(w.shape[1]))
    if drift > tol:
        raise DimensionError(f"columns are not orthonormal (drift {drift:.3e})")
    return w


def orthonormality_drift(mat: np.ndarray) -> float:
    """Frobenius distance of W^T W from the identity."""
    w = np.asarray(mat, dtype=np.float64)
    return float(np.linalg.norm(w.T @ w - np.eye(w.shape[1])))


def apply_lorentz_linear(stiefel: np.ndarray, x: LorentzPoint) -> LorentzPoint:
    """Apply the block transform: time coordinate kept, spatial part rotated."""
    w = np.asarray(stiefel, dtype=np.float64)
    if w.shape[1] != x.dim:
        raise DimensionError(
            f"transform expects {w.shape[1]} spatial coordinates, point has {x.dim}")
    return reproject(np.concatenate(([x.x0], w @ x.spatial)))


def tangent_project(stiefel: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Project an ambient gradient onto the Stiefel tangent space at ``stiefel``.

    Uses the Euclidean-metric projection G - W sym(W^T G) with
    sym(A) = (A + A^T)/2, so sym(W^T result) vanishes.
    """
    w = np.asarray(stiefel, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if w.shape != g.shape:
        raise DimensionError(f"shape mismatch: {w.shape} vs {g.shape}")
    wtg = w.T @ g
    return g - w @ ((wtg + wtg.T) / 2.0)


def retract(stiefel: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    """QR retraction of a tangent step: orthonormal factor of W - step * direction."""
    w = np.asarray(stiefel, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if w.shape != d.shape:
        raise DimensionError(f"shape mismatch: {w.shape} vs {d.shape}")
    return _qr_orthonormal(w - step * d)


def rsgd_step(stiefel: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """One Riemannian SGD step: tangent-project the gradient, then retract."""
    return retract(stiefel, tangent_project(stiefel, grad), lr)


def _qr_orthonormal(a: np.ndarray) -> np.ndarray:
    """Q factor with the sign convention diag(R) > 0 (unique for full-rank input)."""
    q, r = np.linalg.qr(a)
    diag = np.diag(r)
    if (np.abs(diag) < 1e-12).any():
        raise RetractionFailureError("QR factor is rank deficient")
    return q * np.sign(diag)
