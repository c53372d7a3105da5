"""Lorentz-model hyperbolic geometry primitives.

Points live on the upper sheet of the unit hyperboloid embedded in n+1
coordinates: <x, x>_L = -1 and x0 > 0, where the indefinite inner
product is <x, y>_L = -x0*y0 + sum_{i>=1} xi*yi (metric signature
diag(-1, 1, ..., 1), curvature fixed at -1).

The module provides the exponential and logarithmic maps, bijections to
the Poincare ball and Klein model, Lorentz factors, Einstein-midpoint
aggregation of Klein points, lifting of Euclidean feature rows onto the
hyperboloid, and numerical re-projection to repair float drift.  All
functions are pure and operate in float64.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    EmptyAggregationError,
    InvalidFeatureError,
    InvalidTangentError,
    NotOnManifoldError,
    OutOfBallError,
    OutOfModelError,
)

# Constructor / invariant tolerance on <x,x>_L + 1.
MANIFOLD_ATOL = 1e-9
# Below this tangent norm exp/log use their removable-limit values.
ZERO_NORM_EPS = 1e-12
# cosh overflows float64 near 710; stop well short for gradient headroom.
MAX_TANGENT_NORM = 350.0
# Ball membership margin for Poincare/Klein coordinates.
BALL_MARGIN = 1e-12
# Out-of-ball midpoints are pulled back to this norm.
CLAMP_NORM = 1.0 - 1e-7


def _as_vector(x, name: str = "vector") -> np.ndarray:
    if isinstance(x, (LorentzPoint, PoincarePoint, KleinPoint)):
        return x.coords
    if isinstance(x, TangentVector):
        return x.vec
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LorentzPoint:
    """A point on the unit hyperboloid, stored in ambient coordinates.

    coords has length n+1; coords[0] is the time coordinate x0.
    Construction validates the manifold constraint.  The tolerance
    scales with x0^2 because evaluating <x,x>_L cancels terms of that
    magnitude, which is all float64 can promise far from the origin.
    """

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise DimensionError(
                f"Lorentz coordinates must be 1-D with length >= 2, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NotOnManifoldError("coordinates contain non-finite values")
        if arr[0] <= 0.0:
            raise NotOnManifoldError(f"time coordinate must be positive, got {arr[0]}")
        ip = lorentz_inner(arr, arr)
        tol = MANIFOLD_ATOL * max(1.0, arr[0] * arr[0])
        if abs(ip + 1.0) > tol:
            raise NotOnManifoldError(
                f"<x,x>_L = {ip:.3e}, expected -1 within {tol:g}")
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        """Intrinsic dimension n (ambient length minus one)."""
        return self.coords.size - 1

    @property
    def x0(self) -> float:
        return float(self.coords[0])

    @property
    def spatial(self) -> np.ndarray:
        return self.coords[1:]


@dataclass(frozen=True)
class TangentVector:
    """A vector in the tangent space at ``base``.

    Tangency means Lorentz-orthogonality to the base point:
    <base, vec>_L = 0.
    """

    base: LorentzPoint
    vec: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.vec, dtype=np.float64)
        if arr.shape != self.base.coords.shape:
            raise DimensionError(
                f"tangent vector shape {arr.shape} does not match base {self.base.coords.shape}")
        ip = lorentz_inner(self.base.coords, arr)
        tol = MANIFOLD_ATOL * max(1.0, self.base.x0 * float(np.abs(arr).max(initial=0.0)))
        if abs(ip) > tol:
            raise InvalidTangentError(
                f"<base,vec>_L = {ip:.3e}, expected 0 within {tol:g}")
        object.__setattr__(self, "vec", arr)


@dataclass(frozen=True)
class PoincarePoint:
    """A point of the Poincare ball model (norm strictly below 1)."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionError("Poincare coordinates must be a nonempty 1-D vector")
        if float(np.linalg.norm(arr)) >= 1.0 - BALL_MARGIN:
            raise OutOfBallError(
                f"Poincare norm {np.linalg.norm(arr):.12f} is not inside the unit ball")
        object.__setattr__(self, "coords", arr)


@dataclass(frozen=True)
class KleinPoint:
    """A point of the Klein model (norm strictly below 1)."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionError("Klein coordinates must be a nonempty 1-D vector")
        if float(np.linalg.norm(arr)) >= 1.0 - BALL_MARGIN:
            raise OutOfModelError(
                f"Klein norm {np.linalg.norm(arr):.12f} is not inside the unit ball")
        object.__setattr__(self, "coords", arr)


def origin(n: int) -> LorentzPoint:
    """The point [1, 0, ..., 0] with n spatial coordinates."""
    if n < 1:
        raise DimensionError("need at least one spatial dimension")
    c = np.zeros(n + 1)
    c[0] = 1.0
    return LorentzPoint(c)


def lorentz_inner(x, y) -> float:
    """Indefinite inner product -x0*y0 + sum_{i>=1} xi*yi."""
    xv = _as_vector(x, "x")
    yv = _as_vector(y, "y")
    if xv.size != yv.size:
        raise DimensionError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < 2:
        raise DimensionError("vectors need at least 2 coordinates")
    return float(xv @ yv - 2.0 * xv[0] * yv[0])


def lorentz_norm(v: TangentVector) -> float:
    """Norm sqrt(<v,v>_L) of a tangent vector (always real for valid tangents)."""
    sq = lorentz_inner(v.vec, v.vec)
    if sq < -MANIFOLD_ATOL:
        raise InvalidTangentError(f"tangent self-product {sq:.3e} is negative")
    return float(np.sqrt(max(sq, 0.0)))


def exp_map(x: LorentzPoint, v: TangentVector) -> LorentzPoint:
    """Map a tangent vector at x onto the manifold.

    Returns cosh(|v|)*x + sinh(|v|)*v/|v|, with the base point returned
    exactly when |v| is below the zero threshold.
    """
    if not np.array_equal(v.base.coords, x.coords):
        raise InvalidTangentError("tangent vector is based at a different point")
    norm = lorentz_norm(v)
    if norm > MAX_TANGENT_NORM:
        raise OverflowError(
            f"tangent norm {norm:.3g} exceeds the overflow guard {MAX_TANGENT_NORM:g}")
    if norm < ZERO_NORM_EPS:
        return x
    out = np.cosh(norm) * x.coords + np.sinh(norm) * (v.vec / norm)
    return reproject(out)


def log_map(x: LorentzPoint, y: LorentzPoint) -> TangentVector:
    """Map a manifold point y into the tangent space at x (inverse of exp_map)."""
    if x.coords.size != y.coords.size:
        raise DimensionError("points have different ambient dimensions")
    ip = lorentz_inner(x.coords, y.coords)
    alpha = -ip
    if alpha < 1.0 - MANIFOLD_ATOL:
        raise NotOnManifoldError(
            f"-<x,y>_L = {alpha:.12f} < 1; arguments are not both on the manifold")
    if alpha <= 1.0 + ZERO_NORM_EPS:
        return TangentVector(x, np.zeros_like(x.coords))
    coef = np.arccosh(alpha) / np.sqrt(alpha * alpha - 1.0)
    vec = coef * (y.coords - alpha * x.coords)
    # One Gram-Schmidt pass removes residual normal components from rounding.
    vec = vec + lorentz_inner(x.coords, vec) * x.coords
    return TangentVector(x, vec)


def to_poincare(x: LorentzPoint) -> PoincarePoint:
    """Hyperboloid -> Poincare ball: spatial coordinates over x0 + 1."""
    return PoincarePoint(x.spatial / (x.x0 + 1.0))


def from_poincare(b: PoincarePoint) -> LorentzPoint:
    """Poincare ball -> hyperboloid: [1 + |b|^2, 2b] / (1 - |b|^2)."""
    sq = float(b.coords @ b.coords)
    out = np.concatenate(([1.0 + sq], 2.0 * b.coords)) / (1.0 - sq)
    return reproject(out)


def to_klein(x: LorentzPoint) -> KleinPoint:
    """Hyperboloid -> Klein model: spatial coordinates over x0."""
    return KleinPoint(x.spatial / x.x0)


def from_klein(k: KleinPoint) -> LorentzPoint:
    """Klein model -> hyperboloid: [1, k] / sqrt(1 - |k|^2)."""
    gamma = lorentz_factor(k)
    out = gamma * np.concatenate(([1.0], k.coords))
    return reproject(out)


def lorentz_factor(k) -> float:
    """Lorentz factor 1/sqrt(1 - |k|^2) of a Klein point."""
    kv = _as_vector(k, "k")
    sq = float(kv @ kv)
    if sq >= 1.0:
        raise OutOfModelError(f"Klein norm^2 = {sq:.12f} is not below 1")
    return float(1.0 / np.sqrt(1.0 - sq))


def einstein_midpoint(points: Sequence[KleinPoint], weights,
                      *, weighted_denominator: bool = False) -> KleinPoint:
    """Weighted Einstein midpoint of Klein points.

    Computes sum_j w_j * gamma_j * k_j / sum_j gamma_j, i.e. the weights
    enter the numerator only.  Passing ``weighted_denominator=True``
    switches to the textbook gyromidpoint denominator sum_j w_j * gamma_j.
    A result escaping the unit ball is clamped back to norm 1 - 1e-7 and
    a warning is emitted.
    """
    if len(points) == 0:
        raise EmptyAggregationError("midpoint of an empty point list")
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size != len(points):
        raise DimensionError(
            f"need one weight per point, got {w.size} for {len(points)}")
    if (w < 0.0).any():
        raise DimensionError("midpoint weights must be nonnegative")
    coords = np.stack([_as_vector(p, "klein point") for p in points])
    gammas = np.array([lorentz_factor(c) for c in coords])
    numerator = (w * gammas) @ coords
    denominator = float((w * gammas).sum()) if weighted_denominator else float(gammas.sum())
    if denominator <= 0.0:
        raise EmptyAggregationError("aggregation weights sum to zero")
    mid = numerator / denominator
    norm = float(np.linalg.norm(mid))
    if norm >= 1.0 - BALL_MARGIN:
        warnings.warn(
            f"Einstein midpoint left the unit ball (norm {norm:.6f}); clamping",
            RuntimeWarning, stacklevel=2)
        mid = mid * (CLAMP_NORM / norm)
    return KleinPoint(mid)


def lift_features(features, scale: float = 3.0) -> list[LorentzPoint]:
    """Lift Euclidean feature rows onto the hyperboloid through exp at the origin.

    Each row f_i is treated as the spatial part of a tangent vector
    [0, f_i] at the origin.  If the largest row norm exceeds ``scale``
    all rows are rescaled by scale/maxnorm first, which bounds every
    lifted point's distance from the origin by ``scale``.
    """
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise InvalidFeatureError(f"features must be 2-D, got shape {f.shape}")
    if not np.isfinite(f).all():
        raise InvalidFeatureError("features contain non-finite values")
    time, spatial = lift_feature_arrays(f, scale)
    return [reproject(np.concatenate(([t], s))) for t, s in zip(time, spatial)]


def lift_feature_arrays(features: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized lift: returns (time (N,), spatial (N, d)) hyperboloid coordinates."""
    norms = np.linalg.norm(features, axis=1)
    maxnorm = norms.max(initial=0.0)
    if maxnorm > scale:
        factor = scale / maxnorm
        features = features * factor
        norms = norms * factor
    time = np.cosh(norms)
    # sinh(r)/r -> 1 as r -> 0; rows with r = 0 have zero spatial part anyway.
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    spatial = features * (np.sinh(safe) / safe)[:, None]
    return time, spatial


def reproject(x) -> LorentzPoint:
    """Repair float drift: recompute x0 from the spatial part, keep the rest."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise DimensionError(
            f"coordinates must be 1-D with length >= 2, got shape {arr.shape}")
    spatial = arr[1:]
    out = np.concatenate(([np.sqrt(1.0 + spatial @ spatial)], spatial))
    return LorentzPoint(out)
