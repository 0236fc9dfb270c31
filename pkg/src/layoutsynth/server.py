"""HTTP studio service: loaded encoder+generator pairs behind a JSON API.

Model bundles live in subdirectories of the model root::

    models/<model-id>/generator.ckpt
    models/<model-id>/encoder.ckpt
    models/<model-id>/prototypes.ckpt

Endpoints (all responses deterministic for identical requests):

* ``GET  /models``                   - list loaded models
* ``GET  /models/{id}/classes``      - class palette + mask format contract
* ``POST /models/{id}/synthesize``   - mask (base64 indexed PNG) or stroke
  list, mixing depth, seed, variant count -> base64 images + fidelity score
* ``POST /models/{id}/pseudo-preview`` - seed -> generated image + pseudo mask

Errors: 404 unknown model, 422 malformed payload (bad class id, wrong canvas
size), 409 payload kind contradicts the model's pseudo-label mode.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .encoder import EncoderBundle, load_encoder, pseudo_label_sample
from .errors import InputError, ProvenanceError
from .generator import GeneratorBackend, load_generator
from .images import image_to_png_bytes
from .labeling import upscale_mask
from .masks import (
    UNKNOWN,
    AnnotationDocument,
    SemanticMask,
    class_color,
    mask_from_png_bytes,
    mask_to_png_bytes,
    rasterize_annotations,
)
from .prototypes import VectorSet, load_prototypes
from .synthesis import SynthesisRequest, check_compatibility, layout_fidelity_probe, synthesize_from_mask


@dataclass
class SessionModel:
    model_id: str
    generator: GeneratorBackend
    bundle: EncoderBundle
    prototypes: VectorSet

    @property
    def mode(self) -> str:
        return self.bundle.mode

    @property
    def class_count(self) -> int:
        return self.prototypes.class_count

    @property
    def canvas(self) -> tuple[int, int]:
        md = self.generator.metadata
        return md.output_width, md.output_height

    def class_entries(self) -> list[dict]:
        names = self.bundle.class_names or [
            f"class_{i}" for i in range(self.class_count)
        ]
        return [
            {"id": i, "name": names[i] if i < len(names) else f"class_{i}",
             "color": list(class_color(i))}
            for i in range(self.class_count)
        ]

    def summary(self) -> dict:
        md = self.generator.metadata
        return {
            "id": self.model_id,
            "mode": self.mode,
            "class_count": self.class_count,
            "canvas": list(self.canvas),
            "layer_count": md.layer_count,
        }


def load_session_model(model_id: str, path: Path) -> SessionModel:
    generator = load_generator(path / "generator.ckpt")
    bundle = load_encoder(path / "encoder.ckpt")
    prototypes, _ = load_prototypes(path / "prototypes.ckpt")
    check_compatibility(bundle, generator)  # refuse mismatched provenance
    return SessionModel(model_id, generator, bundle, prototypes)


def load_model_registry(models_dir: str | Path) -> dict[str, SessionModel]:
    root = Path(models_dir)
    if not root.is_dir():
        raise InputError(f"model directory {root} does not exist")
    registry = {}
    for sub in sorted(root.iterdir()):
        if sub.is_dir() and (sub / "encoder.ckpt").exists():
            registry[sub.name] = load_session_model(sub.name, sub)
    if not registry:
        raise InputError(f"no model bundles found under {root}")
    return registry


class StrokePayload(BaseModel):
    class_id: int
    points: list[tuple[float, float]]
    type: str = "polyline"


class SynthesizeBody(BaseModel):
    mask: str | None = None  # base64 indexed PNG
    strokes: list[StrokePayload] | None = None
    mix_layers: int | None = None
    seed: int = 0
    variant_count: int = Field(default=1, ge=1, le=16)


class PseudoPreviewBody(BaseModel):
    seed: int = 0


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _decode_mask(model: SessionModel, body: SynthesizeBody) -> SemanticMask:
    w, h = model.canvas
    if (body.mask is None) == (body.strokes is None):
        raise HTTPException(422, "provide exactly one of 'mask' or 'strokes'")
    if body.strokes is not None:
        if model.mode == "dense":
            raise HTTPException(409, "stroke payloads need a sparse-mode model")
        doc = AnnotationDocument(
            canvas=(w, h), class_count=model.class_count,
            elements=[s.model_dump() for s in body.strokes],
        )
        try:
            return rasterize_annotations(doc)
        except InputError as exc:
            raise HTTPException(422, str(exc))
    try:
        raw = base64.b64decode(body.mask, validate=True)
        mask = mask_from_png_bytes(raw, model.class_count)
    except (InputError, ValueError) as exc:
        raise HTTPException(422, f"malformed mask payload: {exc}")
    if (mask.width, mask.height) != (w, h):
        raise HTTPException(
            422, f"mask is {mask.width}x{mask.height}, model canvas is {w}x{h} "
        )
    if model.mode == "dense" and (mask.labels == UNKNOWN).any():
        raise HTTPException(409, "mask with UNKNOWN pixels needs a sparse-mode model")
    return mask


def create_app(models_dir: str | Path, allow_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="layoutsynth studio", version="0.1.0")
    if allow_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware, allow_origins=allow_origins,
            allow_methods=["*"], allow_headers=["*"],
        )
    registry = load_model_registry(models_dir)

    def get_model(model_id: str) -> SessionModel:
        model = registry.get(model_id)
        if model is None:
            raise HTTPException(404, f"unknown model {model_id!r}")
        return model

    @app.get("/models")
    def list_models():
        return [model.summary() for model in registry.values()]

    @app.get("/models/{model_id}/classes")
    def model_classes(model_id: str):
        model = get_model(model_id)
        md = model.generator.metadata
        return {
            "classes": model.class_entries(),
            "class_count": model.class_count,
            "unknown_index": UNKNOWN,
            "canvas": list(model.canvas),
            "layer_count": md.layer_count,
            "mode": model.mode,
        }

    @app.post("/models/{model_id}/synthesize")
    def synthesize(model_id: str, body: SynthesizeBody):
        model = get_model(model_id)
        mask = _decode_mask(model, body)
        md = model.generator.metadata
        if body.mix_layers is not None and not 0 <= body.mix_layers <= md.layer_count:
            raise HTTPException(422, f"mix_layers must be in [0, {md.layer_count}]")
        request = SynthesisRequest(
            mask=mask, mix_layers=body.mix_layers,
            seed=body.seed, variant_count=body.variant_count,
        )
        result = synthesize_from_mask(model.bundle, model.generator, request)
        try:
            fidelity = float(sum(
                layout_fidelity_probe(
                    model.generator, model.prototypes, mask, lat,
                    model.bundle.sparse_config,
                )
                for lat in result.latents
            ) / len(result.latents))
        except InputError as exc:
            raise HTTPException(422, str(exc))
        return {
            "images": [_b64(image_to_png_bytes(img)) for img in result.images],
            "variant_seeds": result.variant_seeds,
            "mix_layers": result.mix_layers,
            "fidelity": fidelity,
        }

    @app.post("/models/{model_id}/pseudo-preview")
    def pseudo_preview(model_id: str, body: PseudoPreviewBody):
        model = get_model(model_id)
        sample = model.generator.sample(body.seed)
        mask = pseudo_label_sample(sample, model.prototypes, model.bundle.sparse_config)
        w, h = model.canvas
        mask = upscale_mask(mask, w, h)
        return {
            "image": _b64(image_to_png_bytes(sample.image)),
            "mask": _b64(mask_to_png_bytes(mask)),
            "seed": body.seed,
        }

    return app
