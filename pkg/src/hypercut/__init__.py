"""Hyperbolic graph clustering for unsupervised segmentation and localization.

A one-layer graph network constrained to the Lorentz model of hyperbolic
space is trained per image on its patch-affinity graph, minimizing a
relaxed normalized-cut loss with Riemannian optimization.  Hardened
cluster assignments yield masks, bounding boxes and recursive part
segmentations.
"""

from .estimator import HyperbolicGraphClustering
from .hgnn import ModelParams, PatchGraph, build_edge_weights, ncut_loss
from .pipeline import (
    BoundingBox,
    PartSegmentationResult,
    SegmentationResult,
    TttConfig,
    localize,
    part_segmentation,
    segment,
    ttt_fit,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "HyperbolicGraphClustering",
    "ModelParams",
    "PartSegmentationResult",
    "PatchGraph",
    "SegmentationResult",
    "TttConfig",
    "build_edge_weights",
    "localize",
    "ncut_loss",
    "part_segmentation",
    "segment",
    "ttt_fit",
    "__version__",
]
