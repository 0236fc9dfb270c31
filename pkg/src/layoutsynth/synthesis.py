"""Inference: user layout -> encoder -> frozen generator -> image variants.

Multi-modal control follows the usual style-mixing convention: the first
``mix_layers`` (counted from the coarsest layer) take the encoder's codes,
the remaining layers take mapped codes from fresh seeded noise. With
``mix_layers == L`` the output is fully layout-driven and deterministic;
with 0 the layout is ignored entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderBundle
from .errors import InputError, ProvenanceError
from .generator import GeneratorBackend, LatentStack
from .labeling import SparseLabelerConfig, label_dense, label_sparse
from .masks import UNKNOWN, SemanticMask
from .prototypes import DenseVectorSet, VectorSet, resize_mask_to_feature_grid

DEFAULT_MIX_LAYERS = 8


@dataclass
class SynthesisRequest:
    mask: SemanticMask
    mix_layers: int | None = None  # None: min(DEFAULT_MIX_LAYERS, L)
    seed: int = 0
    variant_count: int = 1

    def __post_init__(self):
        if self.variant_count < 1:
            raise InputError(f"variant_count must be >= 1, got {self.variant_count}")
        if self.seed < 0:
            raise InputError(f"seed must be nonnegative, got {self.seed}")


@dataclass
class SynthesisResult:
    images: list[np.ndarray]
    latents: list[LatentStack]
    variant_seeds: list[int]
    mix_layers: int
    request: SynthesisRequest = field(repr=False)


def variant_seed(base_seed: int, index: int) -> int:
    """Documented splitting rule: one request object, reproducible variants."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def check_compatibility(bundle: EncoderBundle, generator: GeneratorBackend) -> None:
    md = generator.metadata
    cfg = bundle.encoder.config
    if cfg.layer_count != md.layer_count or cfg.d_w != md.d_w:
        raise ProvenanceError(
            "encoder/generator structure mismatch: "
            f"encoder (L={cfg.layer_count}, d_w={cfg.d_w}) vs "
            f"generator (L={md.layer_count}, d_w={md.d_w})"
        )
    recorded = bundle.provenance.get("generator_hash")
    actual = generator.weights_hash()
    if recorded != actual:
        raise ProvenanceError(
            f"encoder was trained against generator {str(recorded)[:12]}..., "
            f"loaded generator is {actual[:12]}..."
        )


def synthesize_from_mask(
    bundle: EncoderBundle,
    generator: GeneratorBackend,
    request: SynthesisRequest,
    enforce_provenance: bool = True,
) -> SynthesisResult:
    """Encode the layout once, then render each variant with mixed codes."""
    if enforce_provenance:
        check_compatibility(bundle, generator)
    md = generator.metadata
    mix = request.mix_layers if request.mix_layers is not None else min(
        DEFAULT_MIX_LAYERS, md.layer_count
    )
    if not 0 <= mix <= md.layer_count:
        raise InputError(f"mix_layers must be in [0, {md.layer_count}], got {mix}")

    encoded = bundle.encoder.encode(request.mask)
    images, latents, seeds = [], [], []
    for index in range(request.variant_count):
        if mix == md.layer_count:
            codes = encoded.codes.copy()
            seeds.append(request.seed)  # no stochastic layers: seed is inert
        else:
            vseed = variant_seed(request.seed, index)
            seeds.append(vseed)
            rng = np.random.default_rng(vseed)
            z = rng.standard_normal(md.d_z).astype(np.float32)
            random_codes = generator.map_latent(z).codes
            codes = np.concatenate([encoded.codes[:mix], random_codes[mix:]], axis=0)
        stack = LatentStack(codes)
        image, _ = generator.synthesize(stack)
        images.append(image)
        latents.append(stack)
    return SynthesisResult(
        images=images, latents=latents, variant_seeds=seeds, mix_layers=mix, request=request
    )


def _mask_on_grid(mask: SemanticMask, width: int, height: int) -> SemanticMask:
    """Bring an input layout onto the feature grid for comparison."""
    if mask.kind == "dense":
        return resize_mask_to_feature_grid(mask, width, height)
    labels = np.full((height, width), UNKNOWN, dtype=np.uint8)
    for y, x in mask.annotated_pixels():
        cy = (int(y) * height) // mask.height
        cx = (int(x) * width) // mask.width
        # colliding annotations keep the lowest class id
        labels[cy, cx] = min(labels[cy, cx], mask.labels[y, x])
    return SemanticMask(labels, mask.class_count, "sparse")


def layout_fidelity_probe(
    generator: GeneratorBackend,
    prototypes: VectorSet,
    mask: SemanticMask,
    latents: LatentStack,
    sparse_config: SparseLabelerConfig | None = None,
) -> float:
    """Pseudo-label the synthesized latents and score agreement with the mask.

    The score is the fraction of feature-grid cells, among those where the
    input layout is not UNKNOWN, whose pseudo label matches the layout.
    """
    md = generator.metadata
    reference = _mask_on_grid(mask, md.feature_width, md.feature_height)
    known = reference.labels != UNKNOWN
    if not known.any():
        raise InputError("input mask is entirely UNKNOWN")
    _, features = generator.synthesize(latents, capture_features=True)
    if isinstance(prototypes, DenseVectorSet):
        predicted = label_dense(features, prototypes)
    else:
        predicted = label_sparse(features, prototypes, sparse_config)
    agree = predicted.labels[known] == reference.labels[known]
    return float(agree.mean())
