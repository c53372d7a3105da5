"""Shared synthetic-data builders and geometry helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from hypercut import manifold as mf


def random_point(rng: np.random.Generator, n: int, max_dist: float = 5.0) -> mf.LorentzPoint:
    """Random hyperboloid point within ``max_dist`` of the origin."""
    direction = rng.normal(size=n)
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        direction[0] = 1.0
        norm = 1.0
    radius = rng.uniform(0.0, max_dist)
    vec = np.concatenate(([0.0], direction / norm * radius))
    o = mf.origin(n)
    return mf.exp_map(o, mf.TangentVector(o, vec))


def random_tangent(rng: np.random.Generator, x: mf.LorentzPoint,
                   max_norm: float = 5.0, min_norm: float = 1e-3) -> mf.TangentVector:
    """Random tangent vector at ``x`` with Lorentz norm in [min_norm, max_norm].

    Norms below the exp/log zero thresholds make relative-error
    comparisons meaningless, so the floor keeps sampled vectors in the
    regime the inversion property talks about.
    """
    ambient = rng.normal(size=x.coords.size)
    vec = ambient + mf.lorentz_inner(x.coords, ambient) * x.coords
    sq = mf.lorentz_inner(vec, vec)
    if sq < 1e-16:
        return mf.TangentVector(x, np.zeros_like(vec))
    vec *= rng.uniform(min_norm, max_norm) / np.sqrt(sq)
    return mf.TangentVector(x, vec)


def two_block_features(grid_h: int, grid_w: int, dim: int, seed: int,
                       mean_norm: float = 10.5, noise: float = 0.1):
    """Two well-separated Gaussian feature blocks on the left/right grid halves.

    The block means are opposite vectors, so the cross-block feature
    correlations clamp to zero and the affinity graph splits into two
    near-disconnected cliques.
    """
    rng = np.random.default_rng(seed)
    mu = np.zeros(dim)
    mu[0] = mean_norm
    half = grid_w // 2
    features = np.zeros((grid_h * grid_w, dim))
    truth = np.zeros(grid_h * grid_w, dtype=int)
    for r in range(grid_h):
        for c in range(grid_w):
            i = r * grid_w + c
            truth[i] = 0 if c < half else 1
            mean = mu if truth[i] == 0 else -mu
            features[i] = mean + noise * rng.normal(size=dim)
    return features, truth


def four_part_features(seed: int, dim: int = 16, mean_norm: float = 10.5,
                       common_frac: float = 0.35, noise: float = 0.1):
    """8x8 grid: background ring plus four planted part blocks in the inner 6x6.

    Foreground means share a common component (keeping the foreground one
    connected cluster against the opposite-signed background) plus a
    per-part orthogonal component that dominates within the foreground.
    Returns (features, part_truth) where background positions carry -1.
    """
    rng = np.random.default_rng(seed)
    common = common_frac * mean_norm
    part = np.sqrt(mean_norm ** 2 - common ** 2)
    basis = np.eye(dim)
    features = np.zeros((64, dim))
    part_truth = np.full(64, -1)
    for r in range(8):
        for c in range(8):
            i = r * 8 + c
            if r in (0, 7) or c in (0, 7):
                mean = -mean_norm * basis[0]
            else:
                quadrant = (0 if r < 4 else 1) * 2 + (0 if c < 4 else 1)
                part_truth[i] = quadrant
                mean = common * basis[0] + part * basis[1 + quadrant]
            features[i] = mean + noise * rng.normal(size=dim)
    return features, part_truth


def planted_weight_matrix(rng: np.random.Generator, n: int, split: int,
                          cross_max: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Two-block weight matrix: in-block weight 1, cross-block below ``cross_max``."""
    truth = np.array([0] * split + [1] * (n - split))
    w = np.where(truth[:, None] == truth[None, :], 1.0,
                 rng.uniform(0.0, cross_max, size=(n, n)))
    w = (w + w.T) / 2.0
    return w, truth


def block_features(rng: np.random.Generator, truth: np.ndarray, dim: int = 8,
                   mean_norm: float = 10.5, noise: float = 0.1) -> np.ndarray:
    """Opposite-mean Gaussian features matching a two-block labeling."""
    mu = np.zeros(dim)
    mu[0] = mean_norm
    return np.stack([(mu if t == 0 else -mu) + noise * rng.normal(size=dim)
                     for t in truth])


def gradient_check_instance(seed: int, hidden: int = 8):
    """Random small instance whose forward pass is smooth where FD probes it.

    Finite differences are only a valid derivative oracle away from the
    relu kinks and the out-of-ball clamp, so draws that land within the
    probe radius of either are deterministically re-rolled.
    """
    from hypercut.hgnn import ModelParams, PatchGraph
    from hypercut.manifold import lift_feature_arrays

    for attempt in range(100):
        rng = np.random.default_rng(seed + 10_000 * attempt)
        n = int(rng.integers(4, 11))
        dim = int(rng.integers(2, 5))
        graph = PatchGraph.from_features(rng.normal(size=(n, dim)) * 1.2)
        params = ModelParams.init(dim, 2, hidden=hidden, seed=seed)

        time0, spatial0 = lift_feature_arrays(graph.features, 3.0)
        klein = (spatial0 @ params.stiefel.T) / time0[:, None]
        gamma = 1.0 / np.sqrt(1.0 - (klein * klein).sum(axis=1))
        mid = (graph.weights @ (gamma[:, None] * klein)) / gamma.sum()
        if np.linalg.norm(mid, axis=1).max() > 0.9:
            continue
        g2 = 1.0 / np.sqrt(1.0 - (mid * mid).sum(axis=1))
        poincare = mid * (g2 / (g2 + 1.0))[:, None]
        if np.abs(poincare).min() < 1e-4:
            continue
        relu = np.maximum(poincare, 0.0)
        r2 = (relu * relu).sum(axis=1, keepdims=True)
        factor = np.where(r2 < 1e-4, 1.0 + r2 / 3.0,
                          np.arctanh(np.sqrt(r2)) / np.sqrt(np.where(r2 < 1e-4, 1.0, r2)))
        logmap = 2.0 * factor * relu
        pre_hidden = logmap @ params.fc1_w + params.fc1_b
        if np.abs(pre_hidden).min() < 1e-4:
            continue
        return params, graph
    raise RuntimeError(f"no smooth instance found for seed {seed}")


def fd_param_gradients(params, graph, name: str, h: float = 1e-5, **kw):
    """Central finite differences of the training loss in one parameter array."""
    import dataclasses

    from hypercut import hgnn

    arr = getattr(params, name)
    fd = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = arr.copy()
        minus = arr.copy()
        plus[idx] += h
        minus[idx] -= h
        lp = hgnn.forward(dataclasses.replace(params, **{name: plus}), graph, **kw).loss
        lm = hgnn.forward(dataclasses.replace(params, **{name: minus}), graph, **kw).loss
        fd[idx] = (lp - lm) / (2.0 * h)
    return fd


def relative_gradient_error(analytic: np.ndarray, fd: np.ndarray,
                            floor: float = 1e-6) -> float:
    """Block-norm relative error with an absolute floor.

    The floor guards blocks whose true gradient is small enough that the
    finite-difference quotient is dominated by float64 rounding of the
    loss values themselves.
    """
    denom = max(np.linalg.norm(analytic), np.linalg.norm(fd), floor)
    return float(np.linalg.norm(analytic - fd) / denom)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
