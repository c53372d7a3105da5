"""Trainable clustering model over a patch graph.

One hyperbolic graph-convolution layer followed by a two-layer Euclidean
head.  Node features are lifted onto the hyperboloid, rotated by the
orthonormal Lorentz transform, aggregated with the Einstein midpoint in
Klein coordinates, activated on the Poincare ball, mapped back to the
tangent space at the origin and pushed through fully connected layers
with a row softmax.  Training minimizes a relaxed normalized-cut loss;
gradients come from the small reverse-mode tape in ``autodiff``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, NanGuardError
from .manifold import (
    BALL_MARGIN,
    CLAMP_NORM,
    LorentzPoint,
    lift_feature_arrays,
    reproject,
)
from .stiefel import init_stiefel
from .validation import (
    check_feature_matrix,
    check_positive_degrees,
    check_weight_matrix,
)

DEFAULT_HIDDEN = 32
DEFAULT_FEATURE_SCALE = 3.0


@dataclass(frozen=True)
class PatchGraph:
    """Per-patch features plus the normalized nonnegative edge-weight matrix.

    ``grid_h``/``grid_w`` describe the patch grid when the nodes come from
    an image; graphs built over arbitrary node subsets leave them None.
    """

    features: np.ndarray
    weights: np.ndarray
    grid_h: int | None = None
    grid_w: int | None = None

    def __post_init__(self):
        f = check_feature_matrix(self.features)
        w = check_weight_matrix(self.weights, n_nodes=f.shape[0])
        if (self.grid_h is None) != (self.grid_w is None):
            raise DimensionError("grid_h and grid_w must be given together")
        if self.grid_h is not None and self.grid_h * self.grid_w != f.shape[0]:
            raise DimensionError(
                f"grid {self.grid_h}x{self.grid_w} does not cover {f.shape[0]} nodes")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "weights", w)

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_features(cls, features, grid_h: int | None = None,
                      grid_w: int | None = None) -> "PatchGraph":
        f = check_feature_matrix(features)
        return cls(f, build_edge_weights(f), grid_h, grid_w)


def build_edge_weights(features) -> np.ndarray:
    """Edge weights from the feature Gram matrix, clamped at zero and divided by N.

    The graph is fully connected with self-loops, so the degree-style
    normalizer is the node count itself.
    """
    f = check_feature_matrix(features)
    if f.shape[0] < 2:
        raise DimensionError("edge weights need at least 2 nodes")
    w = np.maximum(f @ f.T, 0.0) / f.shape[0]
    return (w + w.T) / 2.0


@dataclass(frozen=True)
class ModelParams:
    """All trainable parameters.

    ``stiefel`` is the orthonormal spatial block of the Lorentz transform;
    the fc arrays form the two-layer Euclidean readout head.
    """

    stiefel: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray

    @classmethod
    def init(cls, dim: int, n_clusters: int, hidden: int = DEFAULT_HIDDEN,
             seed: int | np.random.Generator = 0) -> "ModelParams":
        """Seeded initialization: QR-orthonormal rotation block, uniform fc layers.

        Fully connected weights and biases draw from
        U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
        """
        if dim < 1 or hidden < 1 or n_clusters < 1:
            raise DimensionError("dim, hidden and n_clusters must be positive")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        stiefel = init_stiefel(dim, rng)
        b1 = 1.0 / np.sqrt(dim)
        b2 = 1.0 / np.sqrt(hidden)
        return cls(
            stiefel=stiefel,
            fc1_w=rng.uniform(-b1, b1, size=(dim, hidden)),
            fc1_b=rng.uniform(-b1, b1, size=hidden),
            fc2_w=rng.uniform(-b2, b2, size=(hidden, n_clusters)),
            fc2_b=rng.uniform(-b2, b2, size=n_clusters),
        )

    @property
    def dim(self) -> int:
        return self.stiefel.shape[0]

    @property
    def hidden(self) -> int:
        return self.fc1_w.shape[1]

    @property
    def n_clusters(self) -> int:
        return self.fc2_w.shape[1]

    @property
    def n_stiefel_params(self) -> int:
        return self.stiefel.size

    @property
    def n_euclid_params(self) -> int:
        return self.fc1_w.size + self.fc1_b.size + self.fc2_w.size + self.fc2_b.size

    @property
    def n_params(self) -> int:
        return self.n_stiefel_params + self.n_euclid_params


class Gradients(NamedTuple):
    """Ambient gradients for every parameter array, plus the loss they belong to."""

    loss: float
    assignment: np.ndarray
    stiefel: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray


@dataclass(frozen=True)
class HiddenStates:
    """Intermediate states of one forward pass."""

    lorentz_states: list
    euclid_states: np.ndarray


@dataclass(frozen=True)
class ForwardResult:
    hidden: HiddenStates
    assignment: np.ndarray
    loss: float


def _guard(t: ad.Tensor, stage: str) -> ad.Tensor:
    if not np.isfinite(t.data).all():
        raise NanGuardError(stage)
    return t


class _Tape(NamedTuple):
    leaves: dict
    poincare_relu: ad.Tensor
    logmap: ad.Tensor
    assignment: ad.Tensor
    loss: ad.Tensor


def _layer_tape(stiefel: ad.Tensor, weights: np.ndarray, time0: np.ndarray,
                spatial0: np.ndarray, weighted_denominator: bool) -> ad.Tensor:
    """Hyperbolic graph layer on the tape; returns relu'd Poincare coordinates."""
    rotated = _guard(ad.constant(spatial0) @ stiefel.T, "lorentz_linear")
    klein = _guard(rotated / ad.constant(time0[:, None]), "klein")
    sq = (klein * klein).sum(axis=1, keepdims=True)
    gamma = _guard(1.0 / ad.sqrt(1.0 - sq), "lorentz_factor")
    numer = ad.constant(weights) @ (gamma * klein)
    if weighted_denominator:
        denom = ad.constant(weights) @ gamma
    else:
        denom = gamma.sum()
    mid = _guard(numer / denom, "midpoint")
    norms = np.linalg.norm(mid.data, axis=1)
    if (norms >= 1.0 - BALL_MARGIN).any():
        # Keep-alive clamp; the pullback factor is treated as constant.
        warnings.warn(
            f"{int((norms >= 1.0 - BALL_MARGIN).sum())} aggregated midpoints left "
            "the unit ball; clamping", RuntimeWarning, stacklevel=3)
        factors = np.where(norms < 1.0 - BALL_MARGIN, 1.0, CLAMP_NORM / norms)
        mid = mid * ad.constant(factors[:, None])
    sq_mid = (mid * mid).sum(axis=1, keepdims=True)
    g_mid = 1.0 / ad.sqrt(1.0 - sq_mid)
    poincare = mid * (g_mid / (g_mid + 1.0))
    return _guard(ad.relu(poincare), "activation")


def _readout_tape(poincare_relu: ad.Tensor, fc1_w: ad.Tensor, fc1_b: ad.Tensor,
                  fc2_w: ad.Tensor, fc2_b: ad.Tensor) -> tuple[ad.Tensor, ad.Tensor]:
    """Origin log map plus the two-layer head; returns (logmap, assignment)."""
    r2 = (poincare_relu * poincare_relu).sum(axis=1, keepdims=True)
    logmap = _guard(2.0 * ad.arctanh_over_sqrt(r2) * poincare_relu, "log_map")
    hidden = ad.relu(logmap @ fc1_w + fc1_b)
    logits = _guard(hidden @ fc2_w + fc2_b, "logits")
    return logmap, _guard(ad.softmax_rows(logits), "assignment")


def _loss_tape(assignment: ad.Tensor, weights: np.ndarray,
               degrees: np.ndarray) -> ad.Tensor:
    k = assignment.data.shape[1]
    s = assignment
    cut_num = (s * (ad.constant(weights) @ s)).sum()
    cut_den = (s * s * ad.constant(degrees[:, None])).sum()
    gram = s.T @ s
    fro = ad.sqrt((gram * gram).sum())
    resid = gram / fro - ad.constant(np.eye(k) / np.sqrt(k))
    ortho = ad.sqrt((resid * resid).sum())
    return _guard(0.0 - cut_num / cut_den + ortho, "loss")


def _build_tape(params: ModelParams, graph: PatchGraph, feature_scale: float,
                weighted_denominator: bool, with_grad: bool) -> _Tape:
    time0, spatial0 = lift_feature_arrays(graph.features, feature_scale)
    degrees = check_positive_degrees(graph.weights)
    wrap = ad.leaf if with_grad else ad.constant
    leaves = {
        "stiefel": wrap(params.stiefel),
        "fc1_w": wrap(params.fc1_w),
        "fc1_b": wrap(params.fc1_b),
        "fc2_w": wrap(params.fc2_w),
        "fc2_b": wrap(params.fc2_b),
    }
    poincare_relu = _layer_tape(leaves["stiefel"], graph.weights, time0, spatial0,
                                weighted_denominator)
    logmap, assignment = _readout_tape(poincare_relu, leaves["fc1_w"], leaves["fc1_b"],
                                       leaves["fc2_w"], leaves["fc2_b"])
    loss = _loss_tape(assignment, graph.weights, degrees)
    return _Tape(leaves, poincare_relu, logmap, assignment, loss)


def _lorentz_states_from_poincare(poincare: np.ndarray) -> list:
    r2 = (poincare * poincare).sum(axis=1)
    spatial = 2.0 * poincare / (1.0 - r2)[:, None]
    return [reproject(np.concatenate(([1.0], row))) for row in spatial]


def hgcn_layer(params: ModelParams, graph: PatchGraph, states: list[LorentzPoint],
               *, weighted_denominator: bool = False) -> list[LorentzPoint]:
    """One hyperbolic graph-convolution layer over explicit node states."""
    if len(states) != graph.n_nodes:
        raise DimensionError(
            f"{len(states)} states for a graph with {graph.n_nodes} nodes")
    time0 = np.array([p.x0 for p in states])
    spatial0 = np.stack([p.spatial for p in states])
    if spatial0.shape[1] != params.dim:
        raise DimensionError(
            f"states have {spatial0.shape[1]} spatial coordinates, "
            f"transform expects {params.dim}")
    out = _layer_tape(ad.constant(params.stiefel), graph.weights, time0, spatial0,
                      weighted_denominator)
    return _lorentz_states_from_poincare(out.data)


def readout(params: ModelParams, states: list[LorentzPoint]) -> np.ndarray:
    """Soft cluster assignments from node states: origin log map, two fc layers, softmax."""
    t = np.array([p.x0 for p in states])
    spatial = np.stack([p.spatial for p in states])
    # arccosh(t)/sqrt(t^2-1) -> 1 as t -> 1; guard the coincident-origin case.
    grown = t > 1.0 + 1e-12
    tt = np.where(grown, t, 2.0)
    coef = np.where(grown, np.arccosh(tt) / np.sqrt(tt * tt - 1.0), 1.0)
    logmap = coef[:, None] * spatial
    hidden = np.maximum(logmap @ params.fc1_w + params.fc1_b, 0.0)
    logits = hidden @ params.fc2_w + params.fc2_b
    return _softmax(logits)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def ncut_loss(assignment, weights) -> float:
    """Relaxed normalized-cut loss of a soft assignment against an edge-weight matrix.

    First term: -tr(S^T W S) / tr(S^T D S), within [-1, 0].  Second term:
    the Frobenius distance of S^T S / |S^T S|_F from I_k / sqrt(k).
    """
    s = np.asarray(assignment, dtype=np.float64)
    if s.ndim != 2:
        raise DimensionError(f"assignment must be 2-D, got shape {s.shape}")
    if (s < 0.0).any() or np.abs(s.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("assignment rows must be nonnegative and sum to 1")
    w = check_weight_matrix(weights, n_nodes=s.shape[0])
    degrees = check_positive_degrees(w)
    cut = -float((s * (w @ s)).sum()) / float((degrees[:, None] * s * s).sum())
    gram = s.T @ s
    k = s.shape[1]
    ortho = float(np.linalg.norm(gram / np.linalg.norm(gram) - np.eye(k) / np.sqrt(k)))
    return cut + ortho


def forward(params: ModelParams, graph: PatchGraph, *,
            feature_scale: float = DEFAULT_FEATURE_SCALE,
            weighted_denominator: bool = False) -> ForwardResult:
    """Full forward pass from raw graph features; no gradients."""
    tape = _build_tape(params, graph, feature_scale, weighted_denominator,
                       with_grad=False)
    hidden = HiddenStates(
        lorentz_states=_lorentz_states_from_poincare(tape.poincare_relu.data),
        euclid_states=tape.logmap.data.copy(),
    )
    return ForwardResult(hidden=hidden, assignment=tape.assignment.data.copy(),
                         loss=float(tape.loss.data))


def loss_gradients(params: ModelParams, graph: PatchGraph, *,
                   feature_scale: float = DEFAULT_FEATURE_SCALE,
                   weighted_denominator: bool = False) -> Gradients:
    """Loss, assignments and ambient gradients for every parameter array."""
    tape = _build_tape(params, graph, feature_scale, weighted_denominator,
                       with_grad=True)
    tape.loss.backward()
    grads = {}
    for name, tensor in tape.leaves.items():
        g = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if not np.isfinite(g).all():
            raise NanGuardError(f"backward:{name}")
        grads[name] = g
    return Gradients(loss=float(tape.loss.data),
                     assignment=tape.assignment.data.copy(), **grads)
