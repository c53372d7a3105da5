"""Evaluation metrics and the exhaustive normalized-cut oracle.

Covers box-level localization scoring (IoU, CorLoc), mask overlap
(mIoU over foreground/background), clustering agreement (NMI with
arithmetic-mean normalization, adjusted Rand index) and a brute-force
enumeration of all bipartitions that minimizes the classic two-sided
normalized-cut objective on small graphs, used to audit the trained
relaxation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGraphError, DimensionError, TooLargeError
from .pipeline import BoundingBox
from .validation import check_positive_degrees, check_weight_matrix


def bbox_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes with inclusive pixel coordinates."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min) + 1
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a.x_max - a.x_min + 1) * (a.y_max - a.y_min + 1)
    area_b = (b.x_max - b.x_min + 1) * (b.y_max - b.y_min + 1)
    return inter / (area_a + area_b - inter)


def corloc(predictions: list[list[BoundingBox]],
           ground_truth: list[list[BoundingBox]]) -> float:
    """Percentage of images where some predicted box exceeds IoU 0.5 (strict).

    Images with no prediction or no ground truth count as misses.
    """
    if len(predictions) != len(ground_truth):
        raise DimensionError(
            f"{len(predictions)} predictions vs {len(ground_truth)} ground truths")
    if not predictions:
        raise DimensionError("empty dataset")
    hits = 0
    for preds, gts in zip(predictions, ground_truth):
        if any(bbox_iou(p, g) > 0.5 for p in preds for g in gts):
            hits += 1
    return 100.0 * hits / len(predictions)


def miou(pred, gt) -> float:
    """Mean IoU over the foreground and background classes of two binary masks.

    A class absent from both masks is skipped.
    """
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    if p.shape != g.shape:
        raise DimensionError(f"mask shapes differ: {p.shape} vs {g.shape}")
    scores = []
    for cls in (True, False):
        pc = p == cls
        gc = g == cls
        union = (pc | gc).sum()
        if union == 0:
            continue
        scores.append((pc & gc).sum() / union)
    return float(np.mean(scores))


def mean_miou(preds: list, gts: list) -> float:
    """Dataset mIoU: per-image class average first, then the image average."""
    if len(preds) != len(gts) or not preds:
        raise DimensionError("prediction/ground-truth lists must be equal and nonempty")
    return float(np.mean([miou(p, g) for p, g in zip(preds, gts)]))


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _check_labelings(a, b) -> tuple[np.ndarray, np.ndarray]:
    av = np.asarray(a).ravel()
    bv = np.asarray(b).ravel()
    if av.size != bv.size:
        raise DimensionError(f"labeling lengths differ: {av.size} vs {bv.size}")
    if av.size == 0:
        raise DimensionError("empty labelings")
    return av, bv


def nmi(a, b) -> float:
    """Normalized mutual information with arithmetic-mean entropy normalization."""
    av, bv = _check_labelings(a, b)
    table = _contingency(av, bv)
    n = av.size
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    mi = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            if table[i, j] == 0:
                continue
            pij = table[i, j] / n
            mi += pij * np.log(pij / (pa[i] * pb[j]))
    ha = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    hb = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    mean_h = (ha + hb) / 2.0
    if mean_h == 0.0:
        # Both labelings are constant, hence identical partitions.
        return 1.0
    return float(max(0.0, mi / mean_h))


def ari(a, b) -> float:
    """Adjusted Rand index via pair counting, chance-corrected."""
    av, bv = _check_labelings(a, b)
    table = _contingency(av, bv)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table.astype(np.float64)).sum()
    sum_a = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(av.size))
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


@dataclass(frozen=True)
class ExactCutResult:
    """Optimal bipartition found by enumeration."""

    partition: tuple[tuple[int, ...], tuple[int, ...]]
    ncut_value: float


def ncut_value(membership, weights) -> float:
    """Two-sided normalized-cut cost of a bipartition.

    ``membership`` holds booleans (or 0/1 labels) marking one side.
    Each side's association is its total degree mass, the classic
    spectral-clustering denominator.
    """
    w = check_weight_matrix(weights)
    m = np.asarray(membership).ravel().astype(bool)
    if m.size != w.shape[0]:
        raise DimensionError(
            f"membership length {m.size} does not match {w.shape[0]} nodes")
    if m.all() or (~m).all():
        raise DimensionError("bipartition must be nonempty on both sides")
    degrees = check_positive_degrees(w)
    cut = float(w[np.ix_(m, ~m)].sum())
    assoc_a = float(degrees[m].sum())
    assoc_b = float(degrees[~m].sum())
    return cut / assoc_a + cut / assoc_b


def exact_ncut(weights, max_n: int = 14) -> ExactCutResult:
    """Minimize the normalized cut by enumerating all 2^(N-1) - 1 bipartitions.

    Node 0 is pinned to the first side, which visits each unordered
    bipartition exactly once.  Ties resolve to the first minimizer in
    enumeration order, making the result deterministic.
    """
    w = check_weight_matrix(weights)
    n = w.shape[0]
    if n > max_n:
        raise TooLargeError(f"{n} nodes exceeds the enumeration cap {max_n}")
    if n < 2:
        raise DimensionError("need at least 2 nodes to bipartition")
    degrees = check_positive_degrees(w)
    total = degrees.sum()

    count = 2 ** (n - 1) - 1
    codes = np.arange(1, count + 1, dtype=np.uint32)
    # Membership of nodes 1..n-1; node 0 always on the complement side.
    members = (codes[:, None] >> np.arange(n - 1, dtype=np.uint32)) & 1
    members = np.concatenate([np.zeros((count, 1), dtype=np.uint64),
                              members.astype(np.uint64)], axis=1).astype(np.float64)
    assoc = members @ degrees
    within = np.einsum("ij,ij->i", members @ w, members)
    cut = assoc - within
    other = total - assoc
    values = cut / assoc + cut / other
    best = int(np.argmin(values))
    side = members[best].astype(bool)
    return ExactCutResult(
        partition=(tuple(np.flatnonzero(side).tolist()),
                   tuple(np.flatnonzero(~side).tolist())),
        ncut_value=float(values[best]),
    )
