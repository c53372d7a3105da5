"""Command-line interface: localize, segment, parts and eval subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio, metrics
from .pipeline import (
    TttConfig,
    localize,
    part_segmentation,
    prepare_graph,
    segment,
)

_TASK_DEFAULTS = {"localize": (2, 10), "segment": (2, 10), "parts": (4, 100)}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", required=True, nargs="+",
                   help="feature file(s); several paths switch on batch mode")
    p.add_argument("--out", help="output mask path (directory in batch mode)")
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--epochs", type=int, help="training steps per image")
    p.add_argument("--dim", type=int, default=16, help="working feature dimension")
    p.add_argument("--hidden", type=int, default=32, help="readout hidden width")
    p.add_argument("--lr-euclid", type=float, default=0.01)
    p.add_argument("--lr-stiefel", type=float, default=0.1)
    p.add_argument("--feature-scale", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers across images in batch mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypercut",
        description="Unsupervised segmentation and localization over patch features")
    sub = parser.add_subparsers(dest="command", required=True)

    p_loc = sub.add_parser("localize", help="bound large foreground regions")
    _add_common(p_loc)
    p_loc.add_argument("--boxes-out", help="output JSON box list (directory in batch)")
    p_loc.set_defaults(func=_cmd_task, task="localize")

    p_seg = sub.add_parser("segment", help="foreground/background mask")
    _add_common(p_seg)
    p_seg.set_defaults(func=_cmd_task, task="segment")

    p_parts = sub.add_parser("parts", help="recursive foreground part discovery")
    _add_common(p_parts)
    p_parts.set_defaults(func=_cmd_task, task="parts")

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("--gt", required=True, help="ground-truth file")
    p_eval.add_argument("--pred", required=True, help="prediction file")
    p_eval.add_argument("--metric", required=True,
                        choices=["corloc", "miou", "nmi", "ari"])
    p_eval.set_defaults(func=_cmd_eval)

    return parser


def _config_for(args, seed: int) -> TttConfig:
    k_default, epochs_default = _TASK_DEFAULTS[args.task]
    return TttConfig(
        dim=args.dim,
        hidden=args.hidden,
        k=args.k if args.k is not None else k_default,
        epochs=args.epochs if args.epochs is not None else epochs_default,
        lr_euclid=args.lr_euclid,
        lr_stiefel=args.lr_stiefel,
        feature_scale=args.feature_scale,
        seed=seed,
    )


def _run_one(task: str, feature_path: str, out_path: str | None,
             boxes_path: str | None, cfg: TttConfig, dim: int) -> None:
    ff = fileio.read_features(feature_path)
    graph, _ = prepare_graph(ff.features, ff.grid_h, ff.grid_w, dim)
    if task == "segment":
        seg = segment(graph, cfg)
        if out_path:
            fileio.write_mask(seg.labels, out_path,
                              background=seg.background_cluster,
                              patch_size=ff.patch_size)
    elif task == "localize":
        seg, boxes = localize(graph, cfg, ff.patch_size)
        if boxes_path:
            fileio.write_boxes(boxes, boxes_path)
        if out_path:
            fileio.write_mask(seg.labels, out_path,
                              background=seg.background_cluster,
                              patch_size=ff.patch_size)
    elif task == "parts":
        parts = part_segmentation(graph, cfg)
        if out_path:
            fileio.write_mask(parts.labels, out_path,
                              background=parts.background_label,
                              patch_size=ff.patch_size)
    else:
        raise ValueError(f"unknown task {task!r}")


def _batch_paths(base: str | None, feature_paths: list[str], suffix: str) -> list:
    if base is None:
        return [None] * len(feature_paths)
    if len(feature_paths) == 1:
        return [base]
    outdir = Path(base)
    outdir.mkdir(parents=True, exist_ok=True)
    return [str(outdir / (Path(f).stem + suffix)) for f in feature_paths]


def _cmd_task(args) -> int:
    features = list(args.features)
    outs = _batch_paths(args.out, features, ".pgm")
    boxes_base = getattr(args, "boxes_out", None)
    boxes = _batch_paths(boxes_base, features, ".json")
    jobs = []
    for index, (fpath, opath, bpath) in enumerate(zip(features, outs, boxes)):
        cfg = _config_for(args, args.seed + index)
        jobs.append((args.task, fpath, opath, bpath, cfg, args.dim))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_one, *job) for job in jobs]
            for fut in futures:
                fut.result()
    else:
        for job in jobs:
            _run_one(*job)
    return 0


def _load_mask_foreground(path) -> np.ndarray:
    """Binarize a mask: use the sidecar's background gray when present, else > 0."""
    img = fileio.read_pgm(path)
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        bg = meta.get("background_label")
        if bg is not None:
            bg_gray = int(meta["label_to_gray"][str(bg)])
            return img != bg_gray
    return img > 0


def _cmd_eval(args) -> int:
    if args.metric == "corloc":
        preds = fileio.read_box_collection(args.pred)
        gts = fileio.read_box_collection(args.gt)
        if set(preds) != set(gts):
            raise ValueError("prediction and ground-truth image names differ")
        names = sorted(preds)
        value = metrics.corloc([preds[n] for n in names], [gts[n] for n in names])
        print(f"{value:.1f}")
    elif args.metric == "miou":
        value = metrics.miou(_load_mask_foreground(args.pred),
                             _load_mask_foreground(args.gt))
        print(f"{value:.4f}")
    else:
        pred = fileio.read_pgm(args.pred).ravel()
        gt = fileio.read_pgm(args.gt).ravel()
        fn = metrics.nmi if args.metric == "nmi" else metrics.ari
        print(f"{fn(pred, gt):.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single-line diagnostic contract
        print(f"hypercut: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
