"""Per-image test-time training and the task procedures built on it.

Each image gets a freshly initialized model fitted to its own patch
graph by full-batch gradient descent: adaptive-moment SGD for the
Euclidean head and momentumless Riemannian SGD for the orthonormal
rotation block.  The hardened assignments then drive object
localization (bounding boxes around large foreground components),
object segmentation (foreground mask) and recursive part discovery
(re-cluster the foreground patches only).

The relaxed-cut objective normalizes both of its terms, which shrinks
raw full-batch gradients to the 1e-4 scale near the uniform-assignment
plateau; a normalized-step optimizer is what makes the ten-epoch
training budget sufficient, at the same nominal learning rate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import hgnn
from .errors import (
    DimensionError,
    DivergedError,
    EmptyGridError,
    InsufficientForegroundError,
)
from .hgnn import ModelParams, PatchGraph
from .stiefel import rsgd_step
from .validation import check_feature_matrix, check_positive_degrees

def background_label(n_parts: int) -> int:
    """Reserved label for background positions in a merged part grid."""
    return n_parts


@dataclass(frozen=True)
class TttConfig:
    """Hyperparameters of one test-time training run.

    ``lr_euclid`` is the adaptive-moment step size for the fully
    connected head; ``lr_stiefel`` the Riemannian SGD rate for the
    rotation block.
    """

    dim: int = 16
    hidden: int = 32
    k: int = 2
    epochs: int = 10
    lr_euclid: float = 0.01
    lr_stiefel: float = 0.1
    feature_scale: float = 3.0
    seed: int = 0
    weighted_denominator: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_euclid <= 0.0 or self.lr_stiefel <= 0.0:
            raise ValueError("learning rates must be positive")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")


class _Adam:
    """Adaptive-moment steps for the Euclidean parameter arrays."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, names: tuple[str, ...]):
        self.names = names
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params: ModelParams, grads, lr: float) -> dict:
        self.t += 1
        out = {}
        for name in self.names:
            g = getattr(grads, name)
            m = self.m.get(name, 0.0) * self.BETA1 + (1.0 - self.BETA1) * g
            v = self.v.get(name, 0.0) * self.BETA2 + (1.0 - self.BETA2) * g * g
            self.m[name] = m
            self.v[name] = v
            m_hat = m / (1.0 - self.BETA1 ** self.t)
            v_hat = v / (1.0 - self.BETA2 ** self.t)
            out[name] = getattr(params, name) - lr * m_hat / (np.sqrt(v_hat) + self.EPS)
        return out


class TttResult(NamedTuple):
    params: ModelParams
    assignment: np.ndarray
    losses: list


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel-coordinate box; x runs along columns, y along rows."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise DimensionError(
                f"degenerate box ({self.x_min},{self.y_min},{self.x_max},{self.y_max})")
        if min(self.x_min, self.y_min) < 0:
            raise DimensionError("box coordinates must be nonnegative")

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min,
                "x_max": self.x_max, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(int(d["x_min"]), int(d["y_min"]), int(d["x_max"]), int(d["y_max"]))


@dataclass(frozen=True)
class SegmentationResult:
    """Hard labels on the patch grid plus the soft assignment they came from."""

    labels: np.ndarray
    soft: np.ndarray
    background_cluster: int | None = None

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class PartSegmentationResult:
    """Merged part labels; background positions carry the reserved label."""

    labels: np.ndarray
    background_label: int
    stage1: SegmentationResult


def ttt_fit(graph: PatchGraph, cfg: TttConfig) -> TttResult:
    """Fit a fresh model to one graph; returns final parameters and assignments.

    Runs ``cfg.epochs`` full-batch steps.  The loss recorded for an epoch
    is evaluated before that epoch's parameter update.
    """
    if graph.n_nodes < cfg.k:
        raise DimensionError(
            f"graph has {graph.n_nodes} nodes, fewer than k={cfg.k}")
    check_positive_degrees(graph.weights)
    params = ModelParams.init(graph.dim, cfg.k, hidden=cfg.hidden, seed=cfg.seed)
    optimizer = _Adam(("fc1_w", "fc1_b", "fc2_w", "fc2_b"))
    losses = []
    for epoch in range(cfg.epochs):
        grads = hgnn.loss_gradients(
            params, graph, feature_scale=cfg.feature_scale,
            weighted_denominator=cfg.weighted_denominator)
        if not np.isfinite(grads.loss):
            raise DivergedError(epoch)
        losses.append(grads.loss)
        params = replace(
            params,
            stiefel=rsgd_step(params.stiefel, grads.stiefel, cfg.lr_stiefel),
            **optimizer.step(params, grads, cfg.lr_euclid),
        )
    final = hgnn.forward(params, graph, feature_scale=cfg.feature_scale,
                         weighted_denominator=cfg.weighted_denominator)
    return TttResult(params, final.assignment, losses)


def harden(assignment: np.ndarray) -> np.ndarray:
    """Row-wise argmax labels; ties resolve to the lower cluster index."""
    s = np.asarray(assignment, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] < 1:
        raise DimensionError(f"assignment must be 2-D, got shape {s.shape}")
    return s.argmax(axis=1)


def identify_background(labels: np.ndarray) -> int:
    """Pick the background cluster of a label grid.

    A cluster touches an image border if any of its patches lies on that
    border row or column.  The cluster touching the most borders wins
    (the usual case is one touching at least 3 of 4); ties fall back to
    the larger patch count, then the lower cluster index.
    """
    grid = np.asarray(labels)
    if grid.ndim != 2 or grid.size == 0:
        raise EmptyGridError(f"label grid must be 2-D and nonempty, got {grid.shape}")
    clusters = np.unique(grid)
    borders = [grid[0, :], grid[-1, :], grid[:, 0], grid[:, -1]]
    best = None
    for c in clusters:
        touched = sum(1 for b in borders if (b == c).any())
        area = int((grid == c).sum())
        key = (-touched, -area, int(c))
        if best is None or key < best[0]:
            best = (key, int(c))
    return best[1]


def connected_components(labels: np.ndarray, cluster: int) -> list[list[tuple[int, int]]]:
    """4-connected components of one cluster on the patch grid.

    Components are ordered by their topmost-leftmost patch; patches
    within a component are sorted the same way.
    """
    grid = np.asarray(labels)
    if grid.ndim != 2:
        raise DimensionError(f"label grid must be 2-D, got shape {grid.shape}")
    h, w = grid.shape
    seen = np.zeros((h, w), dtype=bool)
    components = []
    for r in range(h):
        for c in range(w):
            if seen[r, c] or grid[r, c] != cluster:
                continue
            stack = [(r, c)]
            seen[r, c] = True
            comp = []
            while stack:
                rr, cc = stack.pop()
                comp.append((rr, cc))
                for nr, nc in ((rr - 1, cc), (rr + 1, cc), (rr, cc - 1), (rr, cc + 1)):
                    if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] \
                            and grid[nr, nc] == cluster:
                        seen[nr, nc] = True
                        stack.append((nr, nc))
            components.append(sorted(comp))
    return sorted(components, key=lambda comp: comp[0])


#: Components at or below this patch count produce no box.
MIN_BOX_PATCHES = 4


def extract_boxes(labels: np.ndarray, background: int, patch_size: int) -> list[BoundingBox]:
    """Tight pixel boxes around foreground components larger than 4 patches."""
    grid = np.asarray(labels)
    if patch_size < 1:
        raise DimensionError(f"patch size must be >= 1, got {patch_size}")
    boxes = []
    for cluster in np.unique(grid):
        if cluster == background:
            continue
        for comp in connected_components(grid, int(cluster)):
            if len(comp) <= MIN_BOX_PATCHES:
                continue
            rows = [r for r, _ in comp]
            cols = [c for _, c in comp]
            boxes.append(BoundingBox(
                x_min=min(cols) * patch_size,
                y_min=min(rows) * patch_size,
                x_max=(max(cols) + 1) * patch_size - 1,
                y_max=(max(rows) + 1) * patch_size - 1,
            ))
    return sorted(boxes, key=lambda b: (b.y_min, b.x_min, b.y_max, b.x_max))


def segment(graph: PatchGraph, cfg: TttConfig) -> SegmentationResult:
    """Two-way segmentation of a grid graph with background identification."""
    if graph.grid_h is None:
        raise DimensionError("segmentation needs a grid-shaped graph")
    result = ttt_fit(graph, cfg)
    labels = harden(result.assignment).reshape(graph.grid_h, graph.grid_w)
    background = identify_background(labels) if cfg.k == 2 else None
    return SegmentationResult(labels=labels, soft=result.assignment,
                              background_cluster=background)


def localize(graph: PatchGraph, cfg: TttConfig,
             patch_size: int) -> tuple[SegmentationResult, list[BoundingBox]]:
    """Object localization: segment with k=2, box the large foreground components.

    An image with no qualifying component yields an empty list (a miss).
    """
    if cfg.k != 2:
        raise ValueError(f"localization is a two-way task, got k={cfg.k}")
    seg = segment(graph, cfg)
    boxes = extract_boxes(seg.labels, seg.background_cluster, patch_size)
    return seg, boxes


def cluster_foreground(features: np.ndarray, foreground: np.ndarray,
                       cfg: TttConfig) -> np.ndarray:
    """Re-cluster foreground patches on their own sub-graph.

    Only the selected feature rows are ever read, so background rows may
    hold arbitrary values.  Returns one label per foreground patch.
    """
    mask = np.asarray(foreground, dtype=bool).ravel()
    count = int(mask.sum())
    if count < 4 or count < cfg.k:
        raise InsufficientForegroundError(
            f"only {count} foreground patches, need at least {max(4, cfg.k)}")
    sub = check_feature_matrix(np.asarray(features, dtype=np.float64)[mask])
    sub_graph = PatchGraph.from_features(sub)
    result = ttt_fit(sub_graph, cfg)
    return harden(result.assignment)


def part_segmentation(graph: PatchGraph, cfg: TttConfig,
                      stage1_epochs: int = 10) -> PartSegmentationResult:
    """Recursive part discovery: split off the background, re-cluster the rest.

    Stage 1 runs a two-way segmentation (``stage1_epochs`` steps); stage 2
    fits ``cfg.k`` parts to the foreground sub-graph with the full
    ``cfg.epochs``.  Background positions get the reserved label ``cfg.k``.
    """
    stage1_cfg = replace(cfg, k=2, epochs=stage1_epochs)
    stage1 = segment(graph, stage1_cfg)
    fg_mask = (stage1.labels != stage1.background_cluster).ravel()
    part_labels = cluster_foreground(graph.features, fg_mask, cfg)
    merged = np.full(graph.n_nodes, background_label(cfg.k), dtype=np.int64)
    merged[fg_mask] = part_labels
    return PartSegmentationResult(
        labels=merged.reshape(graph.grid_h, graph.grid_w),
        background_label=background_label(cfg.k),
        stage1=stage1,
    )


def reduce_features(features: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Best rank-``dim`` feature compression preserving the Gram matrix.

    Truncated SVD of the raw (uncentered) features: returns the reduced
    rows U_r * sigma_r and the projection basis V_r for reuse on new data.
    Component signs are fixed so each basis vector's largest-magnitude
    entry is positive, keeping the reduction deterministic.
    """
    f = check_feature_matrix(features)
    if dim < 1:
        raise DimensionError(f"target dimension must be >= 1, got {dim}")
    if dim >= f.shape[1]:
        return f, np.eye(f.shape[1])
    u, s, vt = np.linalg.svd(f, full_matrices=False)
    basis = vt[:dim]
    signs = np.sign(basis[np.arange(dim), np.abs(basis).argmax(axis=1)])
    signs[signs == 0.0] = 1.0
    basis = basis * signs[:, None]
    return f @ basis.T, basis.T


def prepare_graph(features: np.ndarray, grid_h: int, grid_w: int,
                  dim: int) -> tuple[PatchGraph, np.ndarray]:
    """Reduce features to the working dimension and build the patch graph."""
    reduced, projection = reduce_features(features, dim)
    return PatchGraph.from_features(reduced, grid_h, grid_w), projection
