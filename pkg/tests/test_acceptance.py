"""Acceptance suite: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion.
"""

import time

import numpy as np
import pytest

from hypercut import fileio, hgnn, metrics
from hypercut import manifold as mf
from hypercut import stiefel as st
from hypercut.cli import main
from hypercut.hgnn import ModelParams, PatchGraph
from hypercut.pipeline import TttConfig, harden, part_segmentation, ttt_fit

from conftest import (
    block_features,
    fd_param_gradients,
    four_part_features,
    gradient_check_instance,
    planted_weight_matrix,
    random_point,
    random_tangent,
    relative_gradient_error,
    two_block_features,
)

RECOVERY_SEEDS = (0, 1, 2, 3, 4)


def report(name: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def test_manifold_suite():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst_constraint = 0.0
    worst_inversion = 0.0
    worst_roundtrip = 0.0
    worst_gamma = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        x = random_point(rng, n, max_dist=5.0)
        worst_constraint = max(worst_constraint, abs(mf.lorentz_inner(x, x) + 1.0))

        v = random_tangent(rng, x, max_norm=5.0)
        y = mf.exp_map(x, v)
        back = mf.log_map(x, y)
        rel = np.linalg.norm(back.vec - v.vec) / max(np.linalg.norm(v.vec), 1e-12)
        worst_inversion = max(worst_inversion, rel)
        again = mf.exp_map(x, back)
        worst_inversion = max(
            worst_inversion,
            np.linalg.norm(again.coords - y.coords) / np.linalg.norm(y.coords))

        pb = mf.from_poincare(mf.to_poincare(x))
        kb = mf.from_klein(mf.to_klein(x))
        worst_roundtrip = max(worst_roundtrip,
                              np.abs(pb.coords - x.coords).max(),
                              np.abs(kb.coords - x.coords).max())
        worst_gamma = max(worst_gamma, abs(mf.lorentz_factor(mf.to_klein(x)) - x.x0))
    elapsed = time.perf_counter() - start
    ok = (worst_constraint < 1e-8 and worst_inversion < 1e-6
          and worst_roundtrip < 1e-9 and worst_gamma < 1e-9 and elapsed < 1.0)
    report("manifold suite (1000 random points/tangents)", ok,
           f"constraint {worst_constraint:.1e}, inversion {worst_inversion:.1e}, "
           f"roundtrip {worst_roundtrip:.1e}, gamma {worst_gamma:.1e}, {elapsed:.2f}s")


def test_stiefel_suite():
    rng = np.random.default_rng(1)
    w = st.init_stiefel(16, 0)
    for _ in range(10_000):
        w = st.rsgd_step(w, rng.uniform(-1.0, 1.0, size=(16, 16)), 0.1)
    drift = st.orthonormality_drift(w)

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        mat = st.init_stiefel(n, int(rng.integers(0, 1_000_000)))
        x = random_point(rng, n, max_dist=5.0)
        y = st.apply_lorentz_linear(mat, x)
        worst = max(worst, abs(mf.lorentz_inner(y, y) + 1.0))
    ok = drift < 1e-6 and worst < 1e-8
    report("stiefel suite (1e4 rsgd steps + manifold preservation)", ok,
           f"drift {drift:.1e}, constraint {worst:.1e}")


def test_gradient_check():
    worst = 0.0
    for seed in range(20):
        params, graph = gradient_check_instance(seed)
        grads = hgnn.loss_gradients(params, graph)
        for name in ("stiefel", "fc1_w", "fc1_b", "fc2_w", "fc2_b"):
            fd = fd_param_gradients(params, graph, name, h=1e-5)
            worst = max(worst, relative_gradient_error(getattr(grads, name), fd))
    report("gradient check (20 instances vs central differences)", worst < 1e-4,
           f"worst rel err {worst:.2e}")


def test_loss_closed_forms():
    rng = np.random.default_rng(2)
    w = hgnn.build_edge_weights(rng.normal(size=(12, 4)) + 1.5)
    uniform = np.full((12, 2), 0.5)
    err_uniform = abs(hgnn.ncut_loss(uniform, w) - (-1.0 + np.sqrt(2.0 - np.sqrt(2.0))))

    two_comp = np.zeros((8, 8))
    two_comp[:4, :4] = 0.7
    two_comp[4:, 4:] = 1.3
    hard = np.zeros((8, 2))
    hard[:4, 0] = 1.0
    hard[4:, 1] = 1.0
    err_hard = abs(hgnn.ncut_loss(hard, two_comp) - (-1.0))
    ok = err_uniform < 1e-9 and err_hard < 1e-9
    report("loss closed forms (uniform and hard balanced)", ok,
           f"uniform err {err_uniform:.1e}, hard err {err_hard:.1e}")


def test_oracle_equivalence():
    checked = 0
    passed = 0
    worst_ratio = 0.0
    for index in range(20):
        rng = np.random.default_rng(100 + index)
        n = int(rng.integers(6, 13))
        split = int(rng.integers(2, n - 1))
        weights, truth = planted_weight_matrix(rng, n, split)
        features = block_features(rng, truth)
        optimum = metrics.exact_ncut(weights).ncut_value
        graph = PatchGraph(features, weights)
        for seed in RECOVERY_SEEDS:
            checked += 1
            labels = harden(ttt_fit(graph, TttConfig(k=2, epochs=10, seed=seed)).assignment)
            if labels.min() == labels.max():
                continue
            achieved = metrics.ncut_value(labels == 1, weights)
            ratio = achieved / optimum if optimum > 0 else np.inf
            worst_ratio = max(worst_ratio, ratio)
            if achieved <= 1.1 * optimum + 1e-12:
                passed += 1
    report("oracle equivalence (trained cut within 10% of enumerated optimum)",
           passed == checked, f"{passed}/{checked}, worst ratio {worst_ratio:.3f}")


def test_planted_partition_recovery():
    aris = []
    for seed in RECOVERY_SEEDS:
        feats, truth = two_block_features(8, 8, 16, seed=seed)
        graph = PatchGraph.from_features(feats, 8, 8)
        labels = harden(ttt_fit(graph, TttConfig(k=2, epochs=10, seed=seed)).assignment)
        aris.append(metrics.ari(labels, truth))
    ok_blocks = all(a == 1.0 for a in aris)

    part_aris = []
    for seed in RECOVERY_SEEDS:
        feats, part_truth = four_part_features(seed=seed)
        graph = PatchGraph.from_features(feats, 8, 8)
        result = part_segmentation(graph, TttConfig(k=4, epochs=100, seed=seed))
        fg = part_truth >= 0
        merged = result.labels.ravel()
        clean_split = ((merged[~fg] == result.background_label).all()
                       and (merged[fg] != result.background_label).all())
        part_aris.append(metrics.ari(merged[fg], part_truth[fg]) if clean_split else 0.0)
    ok_parts = all(a == 1.0 for a in part_aris)
    report("planted-partition recovery (two blocks + recursive parts)",
           ok_blocks and ok_parts,
           f"block ARIs {aris}, part ARIs {part_aris}")


def test_parameter_budget():
    params = ModelParams.init(16, 4, hidden=32, seed=0)
    ok = params.n_stiefel_params == 256 and params.n_params <= 7500
    report("parameter budget (256 rotation params, <= 7.5k total)", ok,
           f"stiefel {params.n_stiefel_params}, total {params.n_params}")


def test_low_dimension_degradation():
    aris = []
    for seed in RECOVERY_SEEDS:
        feats, truth = two_block_features(8, 8, 2, seed=seed)
        graph = PatchGraph.from_features(feats, 8, 8)
        labels = harden(ttt_fit(graph, TttConfig(dim=2, k=2, epochs=10, seed=seed)).assignment)
        aris.append(metrics.ari(labels, truth))
    ok = all(a >= 0.9 for a in aris)
    report("low-dimension degradation (d=2 keeps ARI >= 0.9)", ok, f"ARIs {aris}")


def test_determinism(tmp_path):
    feats, _ = two_block_features(8, 8, 16, seed=9)
    feat_path = tmp_path / "img.sghn"
    fileio.write_features(feat_path, feats, 8, 8, 8)
    outputs = []
    for run in ("a", "b"):
        mask = tmp_path / f"{run}.pgm"
        boxes = tmp_path / f"{run}.json"
        code = main(["localize", "--features", str(feat_path), "--out", str(mask),
                     "--boxes-out", str(boxes), "--seed", "9"])
        assert code == 0
        outputs.append((mask.read_bytes(), (tmp_path / f"{run}.pgm.json").read_text(),
                        boxes.read_bytes()))
    ok = outputs[0] == outputs[1]
    report("determinism (byte-identical masks and boxes across runs)", ok)


def test_throughput():
    rng = np.random.default_rng(3)
    feats = rng.normal(size=(3600, 16)) * 2.0 + 0.5
    graph = PatchGraph.from_features(feats, 60, 60)
    start = time.perf_counter()
    result = ttt_fit(graph, TttConfig(k=2, epochs=10, seed=0))
    elapsed = time.perf_counter() - start
    ok = elapsed < 30.0 and np.isfinite(result.losses).all()
    report("throughput (3600-node graph, 10 epochs, < 30s)", ok, f"{elapsed:.2f}s")
