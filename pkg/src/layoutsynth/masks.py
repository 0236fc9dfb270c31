"""Semantic masks: the dense/sparse label grids exchanged between every stage.

A mask is a (H, W) uint8 grid of class ids. Sparse masks additionally use the
sentinel ``UNKNOWN`` (255) for pixels that carry no annotation. On disk a mask
is a single-channel indexed PNG whose palette index is the class id, with a
JSON sidecar naming the classes; sparse annotations can alternatively travel
as point/polyline lists in a small JSON document.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError

UNKNOWN = 255

# Fixed display palette; class ids beyond the table wrap around.
_BASE_COLORS = [
    (64, 64, 64),  # background-ish gray for class 0
    (220, 60, 50),
    (60, 110, 220),
    (70, 180, 90),
    (230, 180, 40),
    (160, 80, 200),
    (80, 200, 200),
    (230, 120, 180),
]
UNKNOWN_COLOR = (0, 0, 0)


def class_color(class_id: int) -> tuple[int, int, int]:
    return _BASE_COLORS[class_id % len(_BASE_COLORS)]


@dataclass
class SemanticMask:
    """Per-pixel class assignment. ``kind`` is "dense" or "sparse"."""

    labels: np.ndarray  # (H, W) uint8, class ids; UNKNOWN only when sparse
    class_count: int
    kind: str = "dense"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise InputError(f"mask labels must be 2-D, got shape {self.labels.shape}")
        if self.kind not in ("dense", "sparse"):
            raise InputError(f"mask kind must be dense or sparse, got {self.kind!r}")
        if not 1 <= self.class_count <= 254:
            raise InputError(f"class_count must be in [1, 254], got {self.class_count}")
        known = self.labels != UNKNOWN
        if self.kind == "dense" and not known.all():
            raise InputError("dense mask contains UNKNOWN pixels")
        if known.any() and int(self.labels[known].max()) >= self.class_count:
            raise InputError(
                f"mask contains class id {int(self.labels[known].max())} "
                f">= class_count {self.class_count}"
            )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def annotated_pixels(self) -> np.ndarray:
        """(N, 2) array of (y, x) coordinates that carry a class label."""
        ys, xs = np.nonzero(self.labels != UNKNOWN)
        return np.stack([ys, xs], axis=1)

    def one_hot(self, include_unknown: bool = True) -> np.ndarray:
        """One-hot encode to (C, H, W) float32; UNKNOWN becomes channel C."""
        c = self.class_count + (1 if include_unknown else 0)
        out = np.zeros((c, self.height, self.width), dtype=np.float32)
        idx = self.labels.astype(np.int64)
        if include_unknown:
            idx = np.where(idx == UNKNOWN, self.class_count, idx)
        elif (self.labels == UNKNOWN).any():
            raise InputError("cannot one-hot UNKNOWN pixels without an unknown channel")
        out.reshape(c, -1)[idx.ravel(), np.arange(idx.size)] = 1.0
        return out


def colorize(mask: SemanticMask) -> np.ndarray:
    """(H, W, 3) uint8 visualization using the fixed palette."""
    rgb = np.zeros((mask.height, mask.width, 3), dtype=np.uint8)
    for cid in range(mask.class_count):
        rgb[mask.labels == cid] = class_color(cid)
    rgb[mask.labels == UNKNOWN] = UNKNOWN_COLOR
    return rgb


def _palette_bytes(class_count: int) -> bytes:
    pal = bytearray(256 * 3)
    for cid in range(class_count):
        pal[cid * 3 : cid * 3 + 3] = bytes(class_color(cid))
    pal[UNKNOWN * 3 : UNKNOWN * 3 + 3] = bytes(UNKNOWN_COLOR)
    return bytes(pal)


def mask_to_png_bytes(mask: SemanticMask) -> bytes:
    """Encode as an indexed PNG (palette index = class id, 255 = UNKNOWN)."""
    img = Image.fromarray(mask.labels, mode="P")
    img.putpalette(_palette_bytes(mask.class_count))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(data: bytes, class_count: int, kind: str | None = None) -> SemanticMask:
    img = Image.open(io.BytesIO(data))
    if img.mode != "P":
        raise InputError(f"mask PNG must be palette-indexed, got mode {img.mode}")
    labels = np.asarray(img, dtype=np.uint8)
    if kind is None:
        kind = "sparse" if (labels == UNKNOWN).any() else "dense"
    return SemanticMask(labels, class_count, kind)


def save_mask(mask: SemanticMask, path: str | Path, class_names: list[str] | None = None) -> None:
    """Write the indexed PNG plus its JSON sidecar (``<path>.json``)."""
    path = Path(path)
    path.write_bytes(mask_to_png_bytes(mask))
    sidecar = {
        "kind": mask.kind,
        "size": [mask.width, mask.height],
        "unknown_index": UNKNOWN,
        "classes": [
            {"id": cid, "name": (class_names[cid] if class_names else f"class_{cid}"),
             "color": list(class_color(cid))}
            for cid in range(mask.class_count)
        ],
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_mask(path: str | Path) -> SemanticMask:
    path = Path(path)
    sidecar_path = Path(str(path) + ".json")
    class_count = None
    kind = None
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        class_count = len(sidecar["classes"])
        kind = sidecar.get("kind")
    data = path.read_bytes()
    if class_count is None:
        labels = np.asarray(Image.open(io.BytesIO(data)), dtype=np.uint8)
        known = labels[labels != UNKNOWN]
        class_count = int(known.max()) + 1 if known.size else 1
    return mask_from_png_bytes(data, class_count, kind)


# --- sparse annotation documents -------------------------------------------
#
# {"kind": "sparse", "canvas": [W, H], "class_count": C,
#  "elements": [{"class_id": 1, "type": "point",    "points": [[x, y]]},
#               {"class_id": 2, "type": "polyline", "points": [[x0,y0], ...]}]}


@dataclass
class AnnotationDocument:
    canvas: tuple[int, int]  # (W, H)
    class_count: int
    elements: list[dict] = field(default_factory=list)


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line rasterization; returns (x, y) pixels including both ends."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def rasterize_annotations(doc: AnnotationDocument) -> SemanticMask:
    """Burn points/polylines into a sparse mask, later elements drawn on top."""
    w, h = doc.canvas
    if w <= 0 or h <= 0:
        raise InputError(f"annotation canvas must be positive, got {doc.canvas}")
    labels = np.full((h, w), UNKNOWN, dtype=np.uint8)
    for el in doc.elements:
        cid = int(el["class_id"])
        if not 0 <= cid < doc.class_count:
            raise InputError(f"annotation class id {cid} out of range [0, {doc.class_count})")
        pts = [(int(round(x)), int(round(y))) for x, y in el["points"]]
        kind = el.get("type", "point" if len(pts) == 1 else "polyline")
        if kind == "point":
            pixels = pts
        elif kind == "polyline":
            if len(pts) < 2:
                pixels = pts
            else:
                pixels = []
                for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
                    pixels.extend(bresenham_line(x0, y0, x1, y1))
        else:
            raise InputError(f"unknown annotation element type {kind!r}")
        for x, y in pixels:
            if 0 <= x < w and 0 <= y < h:
                labels[y, x] = cid
    return SemanticMask(labels, doc.class_count, "sparse")


def save_annotations(doc: AnnotationDocument, path: str | Path) -> None:
    payload = {
        "kind": "sparse",
        "canvas": list(doc.canvas),
        "class_count": doc.class_count,
        "elements": doc.elements,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_annotations(path: str | Path) -> AnnotationDocument:
    payload = json.loads(Path(path).read_text())
    if payload.get("kind") != "sparse":
        raise InputError(f"{path}: not a sparse annotation document")
    return AnnotationDocument(
        canvas=tuple(payload["canvas"]),
        class_count=int(payload["class_count"]),
        elements=list(payload["elements"]),
    )
