"""On-disk formats: the binary feature file, PGM masks and JSON boxes.

The feature file is a 24-byte header (magic ``SGHN``, version, grid
height, grid width, channel count, patch size, all little-endian
unsigned 32-bit) followed by grid_h*grid_w*d IEEE-754 32-bit floats in
row-major patch order.  Masks are binary PGM (P5) with a JSON sidecar
describing the label-to-gray mapping; boxes are JSON lists of inclusive
pixel coordinates.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    DimensionError,
    LengthMismatchError,
    NonFinitePayloadError,
)
from .pipeline import BoundingBox

MAGIC = b"SGHN"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


class FeatureFile(NamedTuple):
    features: np.ndarray
    grid_h: int
    grid_w: int
    patch_size: int


def write_features(path, features, grid_h: int, grid_w: int, patch_size: int) -> None:
    """Serialize a feature matrix; rows must follow row-major patch order."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != grid_h * grid_w:
        raise DimensionError(
            f"features shape {f.shape} does not match grid {grid_h}x{grid_w}")
    if not np.isfinite(f).all():
        raise NonFinitePayloadError("refusing to write non-finite features")
    header = _HEADER.pack(MAGIC, VERSION, grid_h, grid_w, f.shape[1], patch_size)
    payload = f.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_features(path) -> FeatureFile:
    """Parse and validate a feature file; payload is widened to float64."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise LengthMismatchError(
            f"file has {len(raw)} bytes, shorter than the {_HEADER.size}-byte header")
    magic, version, grid_h, grid_w, d, patch_size = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}, expected {VERSION}")
    expected = _HEADER.size + 4 * grid_h * grid_w * d
    if len(raw) != expected:
        raise LengthMismatchError(
            f"file has {len(raw)} bytes, header implies {expected}")
    payload = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if not np.isfinite(payload).all():
        raise NonFinitePayloadError("payload contains non-finite values")
    features = payload.astype(np.float64).reshape(grid_h * grid_w, d)
    return FeatureFile(features, grid_h, grid_w, patch_size)


def label_grays(n_labels: int) -> list[int]:
    """Gray value for each label: floor(255 * i / (n_labels - 1))."""
    if n_labels <= 1:
        return [0]
    return [255 * i // (n_labels - 1) for i in range(n_labels)]


def write_mask(labels, path, *, background: int | None = None,
               patch_size: int | None = None) -> None:
    """Write a label grid as a binary PGM plus a JSON sidecar at ``path + ".json"``.

    Labels are spread evenly over 0..255; the sidecar records the exact
    mapping, grid shape, background label and patch size.
    """
    grid = np.asarray(labels)
    if grid.ndim != 2 or grid.size == 0:
        raise DimensionError(f"label grid must be 2-D and nonempty, got {grid.shape}")
    if grid.min() < 0:
        raise DimensionError("labels must be nonnegative")
    n_labels = int(grid.max()) + 1
    grays = label_grays(n_labels)
    img = np.array(grays, dtype=np.uint8)[grid]
    h, w = grid.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())
    sidecar = {
        "grid_h": h,
        "grid_w": w,
        "label_to_gray": {str(i): g for i, g in enumerate(grays)},
        "background_label": background,
        "patch_size": patch_size,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255 into a uint8 grid."""
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise BadMagicError(f"not a binary PGM: {fields[0]!r}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval > 255:
        raise BadVersionError(f"only 8-bit PGM supported, maxval {maxval}")
    pos += 1
    data = raw[pos:]
    if len(data) != w * h:
        raise LengthMismatchError(f"payload has {len(data)} bytes, expected {w * h}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def write_boxes(boxes: list[BoundingBox], path) -> None:
    Path(path).write_text(
        json.dumps([b.to_dict() for b in boxes], indent=2) + "\n")


def read_boxes(path) -> list[BoundingBox]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise DimensionError("box file must hold a JSON list")
    return [BoundingBox.from_dict(d) for d in data]


def read_box_collection(path) -> dict[str, list[BoundingBox]]:
    """Read either a bare box list (one image) or a name -> boxes mapping.

    Ground-truth documents may also wrap per-image entries as
    ``{"boxes": [...]}`` objects with optional extra keys.
    """
    data = json.loads(Path(path).read_text())
    if isinstance(data, list):
        return {"": [BoundingBox.from_dict(d) for d in data]}
    if isinstance(data, dict):
        out = {}
        for name, entry in data.items():
            if isinstance(entry, dict):
                entry = entry.get("boxes", [])
            out[str(name)] = [BoundingBox.from_dict(d) for d in entry]
        return out
    raise DimensionError("box file must hold a JSON list or object")
