"""Layout-fidelity metrics: confusion-matrix IoU family and landmark RMSE.

Reference-scale numbers reported for this family of methods (mIoU in the
40s, FID in the 50s on full-size face datasets) come from full-scale
generators and thousand-image test sets; they are context, not test targets.
FID needs a pretrained perception network and is out of scope here - the
report format leaves a slot for plugging one in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, UndefinedMetricError
from .masks import UNKNOWN, SemanticMask


@dataclass
class ConfusionMatrix:
    """counts[gt, pred] over compared pixels; UNKNOWN ground truth is skipped."""

    counts: np.ndarray  # (C, C) int64
    ignored_pixels: int = 0

    @classmethod
    def empty(cls, class_count: int) -> "ConfusionMatrix":
        return cls(np.zeros((class_count, class_count), dtype=np.int64))

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise InputError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise InputError("confusion matrix counts must be nonnegative")

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def accumulate_confusion(
    pred: SemanticMask, gt: SemanticMask, running: ConfusionMatrix
) -> ConfusionMatrix:
    """Add per-pixel (gt, pred) counts into a fresh matrix (pure addition)."""
    if pred.labels.shape != gt.labels.shape:
        raise InputError(
            f"prediction {pred.labels.shape} and ground truth {gt.labels.shape} differ in size"
        )
    if pred.class_count != gt.class_count or gt.class_count != running.class_count:
        raise InputError("class counts disagree between masks and matrix")
    valid = gt.labels != UNKNOWN
    ignored = int((~valid).sum())
    g = gt.labels[valid].astype(np.int64)
    p = pred.labels[valid].astype(np.int64)
    # the matrix has no UNKNOWN column; predictions must be total
    if (p == UNKNOWN).any():
        raise InputError("prediction contains UNKNOWN pixels on known ground truth")
    c = running.class_count
    add = np.bincount(g * c + p, minlength=c * c).reshape(c, c)
    return ConfusionMatrix(running.counts + add, running.ignored_pixels + ignored)


def _iou_per_class(m: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """(iou, has_union) arrays; IoU is 0 where the union is empty."""
    tp = np.diag(m.counts).astype(np.float64)
    gt_c = m.counts.sum(axis=1).astype(np.float64)
    pred_c = m.counts.sum(axis=0).astype(np.float64)
    union = gt_c + pred_c - tp
    has_union = union > 0
    iou = np.zeros(m.class_count)
    iou[has_union] = tp[has_union] / union[has_union]
    return iou, has_union


def miou(m: ConfusionMatrix) -> float:
    """Mean IoU over classes that occur in ground truth or prediction."""
    iou, has_union = _iou_per_class(m)
    if not has_union.any():
        raise UndefinedMetricError("mIoU undefined: every class has an empty union")
    return float(iou[has_union].mean())


def fwiou(m: ConfusionMatrix) -> float:
    """IoU weighted by ground-truth class frequency."""
    if m.total == 0:
        raise UndefinedMetricError("fwIoU undefined on an empty matrix")
    iou, has_union = _iou_per_class(m)
    freq = m.counts.sum(axis=1).astype(np.float64) / m.total
    return float((freq[has_union] * iou[has_union]).sum())


def pixel_accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise UndefinedMetricError("accuracy undefined on an empty matrix")
    return float(np.trace(m.counts) / m.total)


# --------------------------------------------------------------------------
# Landmarks
# --------------------------------------------------------------------------


@dataclass
class LandmarkSet:
    """Named 2-D points for one image; ``detected=False`` means no face found."""

    points: list[tuple[str, float, float]] = field(default_factory=list)
    detected: bool = True

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {name: (x, y) for name, x, y in self.points}


def landmark_rmse(
    pred: list[LandmarkSet], gt: list[LandmarkSet]
) -> tuple[float, int]:
    """Pooled RMSE of Euclidean landmark distances, plus the N/A count.

    Prediction sets with ``detected=False`` are excluded and counted as N/A.
    Landmarks pair by name; names missing on one side of an otherwise
    detected pair are skipped per-point. All matched (image, landmark) pairs
    pool into a single RMSE.
    """
    if len(pred) != len(gt):
        raise InputError(f"got {len(pred)} predictions for {len(gt)} ground-truth sets")
    na_count = 0
    sq_dists: list[float] = []
    for p_set, g_set in zip(pred, gt):
        if not g_set.detected:
            raise InputError("ground-truth landmark sets must all be detected")
        if not p_set.detected:
            na_count += 1
            continue
        g_points = g_set.as_dict()
        for name, x, y in p_set.points:
            if name in g_points:
                gx, gy = g_points[name]
                sq_dists.append((x - gx) ** 2 + (y - gy) ** 2)
    if not sq_dists:
        raise UndefinedMetricError("no matched landmark pairs", na_count=na_count)
    return float(np.sqrt(np.mean(sq_dists))), na_count


def load_landmarks(path: str | Path) -> LandmarkSet:
    """Structured-text landmark file:
    {"detected": true, "points": [{"name": "eye_l", "x": 10.5, "y": 20.0}]}"""
    doc = json.loads(Path(path).read_text())
    return LandmarkSet(
        points=[(p["name"], float(p["x"]), float(p["y"])) for p in doc.get("points", [])],
        detected=bool(doc.get("detected", True)),
    )


def save_landmarks(landmarks: LandmarkSet, path: str | Path) -> None:
    doc = {
        "detected": landmarks.detected,
        "points": [{"name": n, "x": x, "y": y} for n, x, y in landmarks.points],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def metric_report(
    m: ConfusionMatrix | None = None,
    selection: list[str] | None = None,
    rmse: tuple[float, int] | None = None,
) -> dict:
    """Summary dict for the requested metrics (defaults to the IoU family)."""
    selection = selection or ["miou", "fwiou", "accuracy"]
    fns = {"miou": miou, "fwiou": fwiou, "accuracy": pixel_accuracy}
    report: dict = {}
    if m is not None:
        for name in selection:
            if name in fns:
                report[name] = fns[name](m)
        report["compared_pixels"] = m.total
        report["ignored_pixels"] = m.ignored_pixels
    if rmse is not None:
        report["landmark_rmse"], report["landmark_na_count"] = rmse
    return report
