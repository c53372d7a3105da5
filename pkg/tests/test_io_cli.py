"""File formats and the command-line interface."""

import json
import struct

import numpy as np
import pytest

from hypercut import fileio
from hypercut.cli import main
from hypercut.errors import (
    BadMagicError,
    BadVersionError,
    LengthMismatchError,
    NonFinitePayloadError,
)
from hypercut.pipeline import BoundingBox

from conftest import two_block_features


def blob_features(seed=0, grid=16, rows=(3, 10), cols=(4, 11),
                  mean_norm=10.5, noise=0.1, dim=16):
    """Planted foreground blob on a background grid (opposite feature means)."""
    rng = np.random.default_rng(seed)
    mu = np.zeros(dim)
    mu[0] = mean_norm
    feats = np.zeros((grid * grid, dim))
    for r in range(grid):
        for c in range(grid):
            inside = rows[0] <= r <= rows[1] and cols[0] <= c <= cols[1]
            feats[r * grid + c] = (mu if inside else -mu) + noise * rng.normal(size=dim)
    return feats


class TestFeatureFile:
    def test_roundtrip_bit_identical(self, tmp_path, rng):
        feats = rng.normal(size=(12, 5)).astype(np.float32).astype(np.float64)
        path = tmp_path / "f.sghn"
        fileio.write_features(path, feats, 3, 4, 8)
        again = tmp_path / "g.sghn"
        loaded = fileio.read_features(path)
        fileio.write_features(again, loaded.features, loaded.grid_h, loaded.grid_w,
                              loaded.patch_size)
        assert path.read_bytes() == again.read_bytes()
        np.testing.assert_array_equal(loaded.features, feats)
        assert (loaded.grid_h, loaded.grid_w, loaded.patch_size) == (3, 4, 8)

    def test_shape_arithmetic(self, tmp_path, rng):
        path = tmp_path / "f.sghn"
        fileio.write_features(path, rng.normal(size=(4, 3)), 2, 2, 16)
        assert fileio.read_features(path).features.shape == (4, 3)

    def test_truncated_payload(self, tmp_path, rng):
        path = tmp_path / "f.sghn"
        fileio.write_features(path, rng.normal(size=(4, 3)), 2, 2, 16)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(LengthMismatchError) as err:
            fileio.read_features(path)
        assert str(len(raw)) in str(err.value)
        assert str(len(raw) - 5) in str(err.value)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.sghn"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(BadMagicError):
            fileio.read_features(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "f.sghn"
        header = struct.pack("<4sIIIII", b"SGHN", 2, 1, 1, 1, 8)
        path.write_bytes(header + b"\x00" * 4)
        with pytest.raises(BadVersionError):
            fileio.read_features(path)

    def test_non_finite_payload(self, tmp_path):
        path = tmp_path / "f.sghn"
        header = struct.pack("<4sIIIII", b"SGHN", 1, 1, 1, 1, 8)
        path.write_bytes(header + struct.pack("<f", float("nan")))
        with pytest.raises(NonFinitePayloadError):
            fileio.read_features(path)


class TestMasks:
    def test_binary_grays(self, tmp_path):
        path = tmp_path / "m.pgm"
        fileio.write_mask(np.array([[0, 1], [1, 0]]), path)
        img = fileio.read_pgm(path)
        assert set(img.ravel().tolist()) == {0, 255}

    def test_four_label_grays(self, tmp_path):
        path = tmp_path / "m.pgm"
        fileio.write_mask(np.array([[0, 1], [2, 3]]), path)
        img = fileio.read_pgm(path)
        assert img.ravel().tolist() == [0, 85, 170, 255]

    def test_rewrite_is_byte_identical(self, tmp_path, rng):
        labels = rng.integers(0, 3, size=(6, 7))
        a = tmp_path / "a.pgm"
        b = tmp_path / "b.pgm"
        fileio.write_mask(labels, a, background=2, patch_size=8)
        fileio.write_mask(labels, b, background=2, patch_size=8)
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.pgm.json").read_text() == (tmp_path / "b.pgm.json").read_text()

    def test_sidecar_contents(self, tmp_path):
        path = tmp_path / "m.pgm"
        fileio.write_mask(np.array([[0, 1]]), path, background=1, patch_size=8)
        meta = json.loads((tmp_path / "m.pgm.json").read_text())
        assert meta["grid_h"] == 1 and meta["grid_w"] == 2
        assert meta["background_label"] == 1
        assert meta["patch_size"] == 8
        assert meta["label_to_gray"] == {"0": 0, "1": 255}

    def test_pgm_roundtrip_shape(self, tmp_path, rng):
        labels = rng.integers(0, 2, size=(5, 9))
        path = tmp_path / "m.pgm"
        fileio.write_mask(labels, path)
        img = fileio.read_pgm(path)
        assert img.shape == (5, 9)
        np.testing.assert_array_equal(img > 0, labels > 0)


class TestBoxFiles:
    def test_roundtrip(self, tmp_path):
        boxes = [BoundingBox(0, 8, 23, 23), BoundingBox(1, 2, 3, 4)]
        path = tmp_path / "b.json"
        fileio.write_boxes(boxes, path)
        assert fileio.read_boxes(path) == boxes

    def test_collection_formats(self, tmp_path):
        bare = tmp_path / "bare.json"
        bare.write_text('[{"x_min":0,"y_min":0,"x_max":1,"y_max":1}]')
        assert fileio.read_box_collection(bare) == {"": [BoundingBox(0, 0, 1, 1)]}
        named = tmp_path / "named.json"
        named.write_text(json.dumps({
            "img1": [{"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1}],
            "img2": {"boxes": [{"x_min": 2, "y_min": 2, "x_max": 3, "y_max": 3}]},
        }))
        coll = fileio.read_box_collection(named)
        assert coll["img1"] == [BoundingBox(0, 0, 1, 1)]
        assert coll["img2"] == [BoundingBox(2, 2, 3, 3)]


class TestCli:
    def write_two_block(self, tmp_path, seed=0):
        feats, truth = two_block_features(8, 8, 16, seed=seed)
        path = tmp_path / f"img{seed}.sghn"
        fileio.write_features(path, feats, 8, 8, 8)
        return path, truth

    def test_segment_writes_mask_and_sidecar(self, tmp_path):
        feat_path, _ = self.write_two_block(tmp_path)
        out = tmp_path / "mask.pgm"
        code = main(["segment", "--features", str(feat_path), "--out", str(out)])
        assert code == 0
        assert out.exists() and (tmp_path / "mask.pgm.json").exists()
        img = fileio.read_pgm(out)
        assert img.shape == (8, 8)

    def test_localize_boxes_planted_blob(self, tmp_path):
        feats = blob_features(seed=1)
        feat_path = tmp_path / "blob.sghn"
        fileio.write_features(feat_path, feats, 16, 16, 8)
        boxes_path = tmp_path / "boxes.json"
        code = main(["localize", "--features", str(feat_path),
                     "--boxes-out", str(boxes_path), "--seed", "1"])
        assert code == 0
        boxes = fileio.read_boxes(boxes_path)
        assert len(boxes) == 1
        expected = BoundingBox(4 * 8, 3 * 8, 12 * 8 - 1, 11 * 8 - 1)
        box = boxes[0]
        for got, want in ((box.x_min, expected.x_min), (box.y_min, expected.y_min),
                          (box.x_max, expected.x_max), (box.y_max, expected.y_max)):
            assert abs(got - want) <= 8  # within one patch on each side

    def test_eval_corloc_one_decimal(self, tmp_path, capsys):
        gt = tmp_path / "gt.json"
        pred = tmp_path / "pred.json"
        fileio.write_boxes([BoundingBox(0, 0, 9, 9)], gt)
        fileio.write_boxes([BoundingBox(0, 0, 9, 9)], pred)
        assert main(["eval", "--gt", str(gt), "--pred", str(pred),
                     "--metric", "corloc"]) == 0
        assert capsys.readouterr().out == "100.0\n"

    def test_eval_miou_and_ari_on_masks(self, tmp_path, capsys):
        labels = np.array([[0, 1], [1, 0]])
        a = tmp_path / "a.pgm"
        b = tmp_path / "b.pgm"
        fileio.write_mask(labels, a, background=0)
        fileio.write_mask(labels, b, background=0)
        assert main(["eval", "--gt", str(a), "--pred", str(b), "--metric", "miou"]) == 0
        assert capsys.readouterr().out == "1.0000\n"
        assert main(["eval", "--gt", str(a), "--pred", str(b), "--metric", "ari"]) == 0
        assert capsys.readouterr().out == "1.0000\n"

    def test_missing_required_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["segment"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["segment", "--features", "x.sghn", "--bogus", "1"])
        assert exc.value.code == 2

    def test_runtime_error_exits_1(self, tmp_path, capsys):
        code = main(["segment", "--features", str(tmp_path / "missing.sghn"),
                     "--out", str(tmp_path / "m.pgm")])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("hypercut: error:") and err.count("\n") == 1

    def test_batch_mode_parallel(self, tmp_path):
        paths = []
        for seed in range(3):
            p, _ = self.write_two_block(tmp_path, seed=seed)
            paths.append(str(p))
        outdir = tmp_path / "masks"
        code = main(["segment", "--features", *paths, "--out", str(outdir),
                     "--jobs", "2"])
        assert code == 0
        produced = sorted(f.name for f in outdir.glob("*.pgm"))
        assert produced == ["img0.pgm", "img1.pgm", "img2.pgm"]

    def test_batch_seed_derivation_matches_single_runs(self, tmp_path):
        paths = []
        for seed in range(2):
            p, _ = self.write_two_block(tmp_path, seed=seed)
            paths.append(p)
        outdir = tmp_path / "batch"
        main(["segment", "--features", str(paths[0]), str(paths[1]),
              "--out", str(outdir), "--seed", "7"])
        solo0 = tmp_path / "solo0.pgm"
        solo1 = tmp_path / "solo1.pgm"
        main(["segment", "--features", str(paths[0]), "--out", str(solo0), "--seed", "7"])
        main(["segment", "--features", str(paths[1]), "--out", str(solo1), "--seed", "8"])
        assert (outdir / "img0.pgm").read_bytes() == solo0.read_bytes()
        assert (outdir / "img1.pgm").read_bytes() == solo1.read_bytes()

    def test_parts_subcommand(self, tmp_path):
        from conftest import four_part_features
        feats, _ = four_part_features(seed=0)
        feat_path = tmp_path / "parts.sghn"
        fileio.write_features(feat_path, feats, 8, 8, 8)
        out = tmp_path / "parts.pgm"
        code = main(["parts", "--features", str(feat_path), "--out", str(out),
                     "--epochs", "50"])
        assert code == 0
        meta = json.loads((tmp_path / "parts.pgm.json").read_text())
        assert meta["background_label"] == 4
