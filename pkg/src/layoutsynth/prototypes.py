"""Class prototypes from few-shot labeled pairs.

A labeled pair is a semantic mask plus either an RGB image (inverted into the
generator's latent space on demand) or latent codes recorded when the image
was drawn from the generator itself. Feature maps captured at those latents
are pooled into prototypes:

* dense masks: per-class masked average pooling of the feature map under the
  mask resized to the feature grid, averaged over the pairs where the class
  has support;
* sparse masks: one prototype per annotated pixel, the feature vector of the
  grid cell containing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_archive, save_archive, tensors_digest
from .errors import InputError, MissingClassError, OptimizationError, UnsupportedBackendError
from .generator import GeneratorBackend, LatentStack, StyleToyGenerator
from .images import load_image
from .masks import SemanticMask, load_mask


@dataclass
class LabeledPair:
    mask: SemanticMask
    image: np.ndarray | None = None  # (3, H, W) float32
    latents: LatentStack | None = None

    def __post_init__(self):
        if self.image is None and self.latents is None:
            raise InputError("labeled pair needs an image or latent codes")


@dataclass
class DenseVectorSet:
    """One pooled prototype per class, indexed by class id."""

    vectors: np.ndarray  # (C, Z) float32

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise InputError(f"dense prototypes must be (C, Z), got {self.vectors.shape}")
        if not np.isfinite(self.vectors).all():
            raise InputError("prototype vectors contain non-finite values")
        norms = np.linalg.norm(self.vectors, axis=1)
        if (norms == 0).any():
            raise InputError(f"prototype for class {int(np.argmin(norms))} has zero norm")

    @property
    def class_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def digest(self) -> str:
        return tensors_digest({"vectors": self.vectors}, extra="dense-prototypes")


@dataclass
class SparseVectorSet:
    """One prototype per annotated pixel, tagged with its class and origin."""

    vectors: np.ndarray  # (N, Z) float32
    class_ids: np.ndarray  # (N,) int64
    sources: list[tuple[int, int, int]]  # (pair index, x, y) per entry
    class_count: int

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        if len(self.vectors) == 0:
            raise InputError("sparse prototype set is empty")
        if self.vectors.ndim != 2 or len(self.class_ids) != len(self.vectors):
            raise InputError("sparse prototype arrays are inconsistent")
        if (self.class_ids < 0).any() or (self.class_ids >= self.class_count).any():
            raise InputError("sparse prototype class ids out of range")

    @property
    def entry_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def digest(self) -> str:
        return tensors_digest(
            {"vectors": self.vectors, "class_ids": self.class_ids},
            extra=f"sparse-prototypes|{self.class_count}",
        )


VectorSet = DenseVectorSet | SparseVectorSet


# --------------------------------------------------------------------------
# Mask resizing
# --------------------------------------------------------------------------


def resize_mask_to_feature_grid(mask: SemanticMask, width: int, height: int) -> SemanticMask:
    """Resize a dense mask by per-cell majority vote over covered pixels.

    Majority pooling (rather than subsampling) keeps thin structures alive at
    the feature resolution. Sparse masks are returned unchanged: their
    annotated pixels are mapped to grid cells at prototype-extraction time.
    Majority ties resolve to the lowest class id.
    """
    if width <= 0 or height <= 0:
        raise InputError(f"target size must be positive, got {width}x{height}")
    if mask.kind == "sparse":
        return mask
    src_h, src_w = mask.labels.shape
    if (width, height) == (src_w, src_h):
        return SemanticMask(mask.labels.copy(), mask.class_count, mask.kind)
    if width <= src_w and height <= src_h:
        cell_y = (np.arange(src_h, dtype=np.int64) * height) // src_h
        cell_x = (np.arange(src_w, dtype=np.int64) * width) // src_w
        cell = cell_y[:, None] * width + cell_x[None, :]
        flat = cell.ravel() * mask.class_count + mask.labels.ravel().astype(np.int64)
        counts = np.bincount(flat, minlength=height * width * mask.class_count)
        counts = counts.reshape(height * width, mask.class_count)
        majority = counts.argmax(axis=1).astype(np.uint8).reshape(height, width)
        return SemanticMask(majority, mask.class_count, "dense")
    if width >= src_w and height >= src_h:
        src_y = (np.arange(height, dtype=np.int64) * src_h) // height
        src_x = (np.arange(width, dtype=np.int64) * src_w) // width
        return SemanticMask(mask.labels[np.ix_(src_y, src_x)], mask.class_count, "dense")
    raise InputError("mixed shrink/grow resize is not supported")


# --------------------------------------------------------------------------
# Prototype pooling (pure array math, oracle-tested)
# --------------------------------------------------------------------------


def pool_dense_prototypes(
    features: list[np.ndarray], masks: list[SemanticMask]
) -> DenseVectorSet:
    """Masked average pooling per class, averaged over pairs with support.

    Each feature map is (Z, h, w) aligned with its mask. A class absent from
    one pair's mask simply does not contribute there; absent from every mask
    raises ``MissingClassError`` (its prototype would be undefined).
    """
    if len(features) == 0 or len(features) != len(masks):
        raise InputError("need one feature map per mask, at least one pair")
    class_count = masks[0].class_count
    dim = features[0].shape[0]
    sums = np.zeros((class_count, dim), dtype=np.float64)
    support = np.zeros(class_count, dtype=np.int64)
    for fmap, mask in zip(features, masks):
        fmap = np.asarray(fmap, dtype=np.float32)
        if mask.class_count != class_count:
            raise InputError("masks disagree on class count")
        if mask.kind != "dense":
            raise InputError("dense pooling requires dense masks")
        if fmap.shape != (dim, mask.height, mask.width):
            raise InputError(
                f"feature map {fmap.shape} does not align with mask "
                f"{(dim, mask.height, mask.width)}"
            )
        for cid in range(class_count):
            sel = mask.labels == cid
            if sel.any():
                sums[cid] += fmap[:, sel].mean(axis=1)
                support[cid] += 1
    for cid in range(class_count):
        if support[cid] == 0:
            raise MissingClassError(cid)
    return DenseVectorSet((sums / support[:, None]).astype(np.float32))


def collect_sparse_prototypes(
    features: list[np.ndarray], masks: list[SemanticMask]
) -> SparseVectorSet:
    """One entry per annotated pixel: the feature vector of its grid cell.

    Pixels sharing a cell keep separate entries (possibly sharing a vector);
    entries are ordered by pair, then row-major pixel position.
    """
    if len(features) == 0 or len(features) != len(masks):
        raise InputError("need one feature map per mask, at least one pair")
    class_count = masks[0].class_count
    vectors, class_ids, sources = [], [], []
    for pair_idx, (fmap, mask) in enumerate(zip(features, masks)):
        fmap = np.asarray(fmap, dtype=np.float32)
        grid_h, grid_w = fmap.shape[1], fmap.shape[2]
        pixels = mask.annotated_pixels()
        if len(pixels) == 0:
            raise InputError(f"pair {pair_idx}: sparse mask has no annotated pixels")
        for y, x in pixels:
            cy = (int(y) * grid_h) // mask.height
            cx = (int(x) * grid_w) // mask.width
            vectors.append(fmap[:, cy, cx])
            class_ids.append(int(mask.labels[y, x]))
            sources.append((pair_idx, int(x), int(y)))
    return SparseVectorSet(
        np.stack(vectors), np.asarray(class_ids), sources, class_count
    )


# --------------------------------------------------------------------------
# Latent-space inversion
# --------------------------------------------------------------------------


def mean_latent(generator: GeneratorBackend, num_samples: int = 256, seed: int = 0) -> LatentStack:
    """Average mapped code over random noise draws; the inversion start point."""
    rng = np.random.default_rng(seed)
    md = generator.metadata
    acc = np.zeros(md.d_w, dtype=np.float64)
    for _ in range(num_samples):
        z = rng.standard_normal(md.d_z).astype(np.float32)
        acc += generator.map_latent(z).codes[0]
    return LatentStack.broadcast((acc / num_samples).astype(np.float32), md.layer_count)


@dataclass
class InversionResult:
    latents: LatentStack
    reconstruction_mse: float
    initial_mse: float


def invert_image(
    generator: GeneratorBackend,
    image: np.ndarray,
    steps: int = 200,
    step_size: float = 0.05,
    init: LatentStack | None = None,
    per_layer: bool = False,
    mean_latent_samples: int = 256,
    seed: int = 0,
) -> InversionResult:
    """Gradient-descend a shared latent code to reproduce ``image``.

    Optimizes mean per-pixel squared error from the mean latent (or ``init``)
    with Adam. ``per_layer`` adds a refinement stage that lets the codes of
    individual layers drift apart after the shared stage.
    """
    if not generator.supports_gradients:
        raise UnsupportedBackendError(f"{generator.kind} backend is not differentiable")
    assert isinstance(generator, StyleToyGenerator)
    md = generator.metadata
    image = np.asarray(image, dtype=np.float32)
    if image.shape != (3, md.output_height, md.output_width):
        raise InputError(
            f"image shape {image.shape} does not match generator output "
            f"(3, {md.output_height}, {md.output_width})"
        )
    if init is None:
        init = mean_latent(generator, mean_latent_samples, seed)
    target = torch.from_numpy(image).unsqueeze(0)
    layer_count = md.layer_count

    def reconstruction_loss(ws: torch.Tensor) -> torch.Tensor:
        out, _ = generator.synthesize_t(ws)
        return (out - target).pow(2).mean()

    w = torch.from_numpy(init.codes[0].copy()).unsqueeze(0).requires_grad_(True)
    initial_mse = float(reconstruction_loss(w.detach().unsqueeze(1).expand(-1, layer_count, -1)))
    if steps > 0:
        opt = torch.optim.Adam([w], lr=step_size)
        for _ in range(steps):
            loss = reconstruction_loss(w.unsqueeze(1).expand(-1, layer_count, -1))
            if not torch.isfinite(loss):
                raise OptimizationError("inversion loss became non-finite")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
    ws = w.detach().unsqueeze(1).expand(-1, layer_count, -1).contiguous()

    if per_layer and steps > 0:
        ws = ws.clone().requires_grad_(True)
        opt = torch.optim.Adam([ws], lr=step_size * 0.5)
        for _ in range(steps // 2):
            loss = reconstruction_loss(ws)
            if not torch.isfinite(loss):
                raise OptimizationError("per-layer refinement loss became non-finite")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
        ws = ws.detach()

    final = float(reconstruction_loss(ws))
    return InversionResult(
        latents=LatentStack(ws[0].numpy()),
        reconstruction_mse=final,
        initial_mse=initial_mse,
    )


# --------------------------------------------------------------------------
# Pipeline entry points: labeled pairs -> prototypes
# --------------------------------------------------------------------------


def _pair_features(
    generator: GeneratorBackend, pairs: list[LabeledPair], invert_steps: int, invert_lr: float
) -> list[np.ndarray]:
    features = []
    for pair in pairs:
        latents = pair.latents
        if latents is None:
            latents = invert_image(generator, pair.image, invert_steps, invert_lr).latents
        _, fmap = generator.synthesize(latents, capture_features=True)
        features.append(fmap)
    return features


def dense_prototypes(
    generator: GeneratorBackend,
    pairs: list[LabeledPair],
    invert_steps: int = 200,
    invert_lr: float = 0.05,
) -> DenseVectorSet:
    if not pairs:
        raise InputError("no labeled pairs given")
    for pair in pairs:
        if pair.mask.kind != "dense":
            raise InputError("dense prototype extraction requires dense masks")
    md = generator.metadata
    features = _pair_features(generator, pairs, invert_steps, invert_lr)
    resized = [
        resize_mask_to_feature_grid(p.mask, md.feature_width, md.feature_height) for p in pairs
    ]
    return pool_dense_prototypes(features, resized)


def sparse_prototypes(
    generator: GeneratorBackend,
    pairs: list[LabeledPair],
    invert_steps: int = 200,
    invert_lr: float = 0.05,
) -> SparseVectorSet:
    if not pairs:
        raise InputError("no labeled pairs given")
    for pair in pairs:
        if pair.mask.kind != "sparse":
            raise InputError("sparse prototype extraction requires sparse masks")
    features = _pair_features(generator, pairs, invert_steps, invert_lr)
    return collect_sparse_prototypes(features, [p.mask for p in pairs])


# --------------------------------------------------------------------------
# Disk formats
# --------------------------------------------------------------------------


def save_prototypes(
    vecset: VectorSet,
    path: str | Path,
    class_names: list[str] | None = None,
    generator_hash: str | None = None,
) -> None:
    meta = {
        "class_count": vecset.class_count,
        "class_names": class_names or [f"class_{i}" for i in range(vecset.class_count)],
        "generator_hash": generator_hash,
    }
    if isinstance(vecset, DenseVectorSet):
        save_archive(path, "dense-prototypes", meta, {"vectors": vecset.vectors})
    else:
        save_archive(
            path, "sparse-prototypes", meta,
            {
                "vectors": vecset.vectors,
                "class_ids": vecset.class_ids,
                "sources": np.asarray(vecset.sources, dtype=np.int64),
            },
        )


def load_prototypes(path: str | Path) -> tuple[VectorSet, dict]:
    archive = load_archive(path)
    if archive.kind == "dense-prototypes":
        return DenseVectorSet(archive.tensors["vectors"]), archive.meta
    if archive.kind == "sparse-prototypes":
        sources = [tuple(int(v) for v in row) for row in archive.tensors["sources"]]
        return (
            SparseVectorSet(
                archive.tensors["vectors"], archive.tensors["class_ids"],
                sources, archive.meta["class_count"],
            ),
            archive.meta,
        )
    raise InputError(f"{path}: unknown prototype archive kind {archive.kind!r}")


def load_pair_manifest(path: str | Path) -> tuple[list[str], list[LabeledPair]]:
    """Labeled-pair bundle: JSON manifest linking mask/image/latent files.

    {"classes": ["background", ...],
     "pairs": [{"mask": "pair0_mask.png", "image": "pair0.png",
                "latents": "pair0_latents.npy"}, ...]}
    Paths are relative to the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    classes = list(doc["classes"])
    pairs = []
    for i, entry in enumerate(doc["pairs"]):
        mask = load_mask(base / entry["mask"])
        if mask.class_count != len(classes):
            raise InputError(
                f"pair {i}: mask has {mask.class_count} classes, manifest lists {len(classes)}"
            )
        image = load_image(base / entry["image"]) if entry.get("image") else None
        latents = None
        if entry.get("latents"):
            latents = LatentStack(np.load(base / entry["latents"]))
        pairs.append(LabeledPair(mask=mask, image=image, latents=latents))
    if not pairs:
        raise InputError(f"{path}: manifest lists no pairs")
    return classes, pairs


def save_pair_manifest(
    path: str | Path,
    classes: list[str],
    entries: list[dict],
) -> None:
    payload = {"classes": classes, "pairs": entries}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
