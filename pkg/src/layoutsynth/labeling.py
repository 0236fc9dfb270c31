"""Pseudo semantic masks from generator feature maps.

Dense labeling assigns every feature-grid cell the class of its most cosine-
similar class prototype. Sparse labeling goes the other way: each per-pixel
prototype entry claims its top-k most similar cells, contested cells keep the
highest-similarity claim, and claims below the similarity threshold fall back
to UNKNOWN. Tie-breaking is fully deterministic:

* argmax over classes: lowest class id wins;
* k-th-rank ties over cells: row-major cell order;
* equal-similarity claims on one cell: lowest class id, then lowest entry
  index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .masks import UNKNOWN, SemanticMask
from .prototypes import DenseVectorSet, SparseVectorSet

_NORM_EPS = 1e-12


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """cos(a, b); -1.0 when either vector is (numerically) zero."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na <= _NORM_EPS or nb <= _NORM_EPS:
        return -1.0
    return float(np.dot(a, b) / (na * nb))


@dataclass
class SparseLabelerConfig:
    """Top-k / threshold parameters; defaults follow the reference setting."""

    k: int = 3
    t: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if not -1.0 <= self.t <= 1.0:
            raise InputError(f"t must be in [-1, 1], got {self.t}")


def _cell_similarities(features: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """(N_vectors, H*W) cosine similarities; zero-norm cells/vectors get -1."""
    depth, height, width = features.shape
    cells = features.reshape(depth, -1).astype(np.float64)
    cell_norms = np.linalg.norm(cells, axis=0)
    vecs = vectors.astype(np.float64)
    vec_norms = np.linalg.norm(vecs, axis=1)
    denom = np.outer(vec_norms, cell_norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = (vecs @ cells) / denom
    sims[:, cell_norms <= _NORM_EPS] = -1.0
    sims[vec_norms <= _NORM_EPS, :] = -1.0
    return sims


def label_dense(features: np.ndarray, prototypes: DenseVectorSet) -> SemanticMask:
    """Nearest-prototype class per cell under cosine similarity. Total."""
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 3:
        raise InputError(f"features must be (Z, H, W), got {features.shape}")
    if prototypes.class_count == 0:
        raise InputError("empty prototype set")
    if prototypes.dim != features.shape[0]:
        raise InputError(
            f"prototype dim {prototypes.dim} != feature channels {features.shape[0]}"
        )
    sims = _cell_similarities(features, prototypes.vectors)
    labels = sims.argmax(axis=0).astype(np.uint8)  # first max = lowest class id
    return SemanticMask(
        labels.reshape(features.shape[1], features.shape[2]),
        prototypes.class_count,
        "dense",
    )


def label_sparse(
    features: np.ndarray,
    prototypes: SparseVectorSet,
    config: SparseLabelerConfig | None = None,
    return_similarity: bool = False,
) -> SemanticMask | tuple[SemanticMask, np.ndarray]:
    """Top-k thresholded matching of per-pixel prototypes onto the grid.

    Each entry emits claims at its k most similar cells; a cell keeps the
    claim with the highest similarity and takes its class, unless that
    winning similarity falls below ``config.t``, in which case the cell is
    UNKNOWN (as are cells nobody claimed). With ``return_similarity`` the
    winning similarity per cell is returned too (-inf where unclaimed).
    """
    config = config or SparseLabelerConfig()
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 3:
        raise InputError(f"features must be (Z, H, W), got {features.shape}")
    if prototypes.entry_count == 0:
        raise InputError("empty prototype set")
    if prototypes.dim != features.shape[0]:
        raise InputError(
            f"prototype dim {prototypes.dim} != feature channels {features.shape[0]}"
        )
    height, width = features.shape[1], features.shape[2]
    n_cells = height * width
    sims = _cell_similarities(features, prototypes.vectors)
    k = min(config.k, n_cells)

    best_sim = np.full(n_cells, -np.inf)
    best_class = np.full(n_cells, 256, dtype=np.int64)
    for entry_idx in range(prototypes.entry_count):
        # stable sort on -sim keeps row-major order among k-th-rank ties
        top = np.argsort(-sims[entry_idx], kind="stable")[:k]
        cls = int(prototypes.class_ids[entry_idx])
        for cell in top:
            s = sims[entry_idx, cell]
            if s > best_sim[cell] or (s == best_sim[cell] and cls < best_class[cell]):
                best_sim[cell] = s
                best_class[cell] = cls
        # equal similarity and equal class: earlier entry already holds the cell

    labels = np.full(n_cells, UNKNOWN, dtype=np.uint8)
    claimed = best_sim > -np.inf
    keep = claimed & (best_sim >= config.t)
    labels[keep] = best_class[keep].astype(np.uint8)
    mask = SemanticMask(labels.reshape(height, width), prototypes.class_count, "sparse")
    if return_similarity:
        return mask, best_sim.reshape(height, width)
    return mask


def upscale_mask(mask: SemanticMask, width: int, height: int) -> SemanticMask:
    """Nearest-neighbor enlargement to (width, height); UNKNOWN propagates."""
    if width < mask.width or height < mask.height:
        raise InputError(
            f"upscale target {width}x{height} is smaller than mask "
            f"{mask.width}x{mask.height}"
        )
    if (width, height) == (mask.width, mask.height):
        return SemanticMask(mask.labels.copy(), mask.class_count, mask.kind)
    src_y = (np.arange(height, dtype=np.int64) * mask.height) // height
    src_x = (np.arange(width, dtype=np.int64) * mask.width) // width
    return SemanticMask(mask.labels[np.ix_(src_y, src_x)], mask.class_count, mask.kind)
