"""Session-scoped mini pipeline shared by the CLI and server tests.

Everything is built once against the analytic backend (fast, closed-form):
a generator checkpoint, dense and sparse labeled-pair manifests, prototypes,
briefly trained encoders, and a server model directory with one dense-mode
and one sparse-mode bundle.
"""

import json
from types import SimpleNamespace

import numpy as np
import pytest
import yaml

from layoutsynth import AnalyticShapeGenerator
from layoutsynth.encoder import EncoderConfig, TrainConfig, train
from layoutsynth.masks import UNKNOWN, SemanticMask, save_mask
from layoutsynth.prototypes import (
    LabeledPair,
    dense_prototypes,
    save_prototypes,
    sparse_prototypes,
)

CLASS_NAMES = ["background", "blob", "box"]


def _pair_latents(gen, shift):
    z = np.zeros(8, dtype=np.float32)
    z[1] = shift  # move the circle vertically; both shapes stay present
    return z, gen.map_latent(z)


def _sparse_mask_from_dense(dense, rng, per_class=4):
    labels = np.full(dense.labels.shape, UNKNOWN, dtype=np.uint8)
    for cid in range(dense.class_count):
        coords = np.argwhere(dense.labels == cid)
        if len(coords) == 0:
            continue
        picks = coords[rng.choice(len(coords), size=min(per_class, len(coords)),
                                  replace=False)]
        for y, x in picks:
            labels[y, x] = cid
    return SemanticMask(labels, dense.class_count, "sparse")


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("artifacts")
    gen = AnalyticShapeGenerator(seed=0)

    generator_path = root / "generator.ckpt"
    gen.save(generator_path)

    # labeled pairs (one per shape class so all three classes have support)
    pairs_dir = root / "pairs"
    pairs_dir.mkdir()
    rng = np.random.default_rng(0)
    dense_pairs, sparse_pairs = [], []
    dense_entries, sparse_entries = [], []
    for i, sign in enumerate((-1.0, 1.0)):
        z, latents = _pair_latents(gen, sign)
        dense = gen.analytic_semantics(z)
        sparse = _sparse_mask_from_dense(dense, rng)
        np.save(pairs_dir / f"pair{i}_latents.npy", latents.codes)
        save_mask(dense, pairs_dir / f"pair{i}_dense.png", CLASS_NAMES)
        save_mask(sparse, pairs_dir / f"pair{i}_sparse.png", CLASS_NAMES)
        dense_pairs.append(LabeledPair(mask=dense, latents=latents))
        sparse_pairs.append(LabeledPair(mask=sparse, latents=latents))
        dense_entries.append(
            {"mask": f"pair{i}_dense.png", "latents": f"pair{i}_latents.npy"}
        )
        sparse_entries.append(
            {"mask": f"pair{i}_sparse.png", "latents": f"pair{i}_latents.npy"}
        )
    (pairs_dir / "dense_manifest.json").write_text(
        json.dumps({"classes": CLASS_NAMES, "pairs": dense_entries})
    )
    (pairs_dir / "sparse_manifest.json").write_text(
        json.dumps({"classes": CLASS_NAMES, "pairs": sparse_entries})
    )

    dense_protos = dense_prototypes(gen, dense_pairs)
    sparse_protos = sparse_prototypes(gen, sparse_pairs)

    encoder_config = EncoderConfig(
        input_channels=4, layer_count=4, d_w=8,
        input_height=32, input_width=32, base_channels=16,
    )

    models_dir = root / "models"
    bundles = {}
    for name, protos, iters in (
        ("shapes-dense", dense_protos, 120),
        ("shapes-sparse", sparse_protos, 60),
    ):
        model_dir = models_dir / name
        model_dir.mkdir(parents=True)
        gen.save(model_dir / "generator.ckpt")
        save_prototypes(protos, model_dir / "prototypes.ckpt",
                        class_names=CLASS_NAMES, generator_hash=gen.weights_hash())
        result = train(
            gen, protos,
            TrainConfig(iterations=iters, batch_size=2, learning_rate=1e-3,
                        seed=0, checkpoint_every=10_000, diagnostic_every=10_000),
            encoder_config,
            out_dir=model_dir,
            class_names=CLASS_NAMES,
        )
        bundles[name] = result
    # keep only the bundle files the server needs in the model dirs
    for name in bundles:
        for extra in (models_dir / name).glob("diagnostics_*.png"):
            extra.unlink()

    dense_layout_z = np.zeros(8, dtype=np.float32)
    dense_layout = gen.analytic_semantics(dense_layout_z)
    layout_path = root / "layout.png"
    save_mask(dense_layout, layout_path, CLASS_NAMES)

    config_path = root / "config.yaml"
    config_path.write_text(yaml.safe_dump({
        "seed": 7,
        "mode": "dense",
        "out_dir": str(root / "out"),
        "paths": {
            "generator": str(models_dir / "shapes-dense" / "generator.ckpt"),
            "encoder": str(models_dir / "shapes-dense" / "encoder.ckpt"),
            "prototypes": str(models_dir / "shapes-dense" / "prototypes.ckpt"),
            "pairs_manifest": str(pairs_dir / "dense_manifest.json"),
        },
        "train": {"iterations": 25, "batch_size": 2, "learning_rate": 0.001},
        "encoder": {"base_channels": 16},
    }))

    return SimpleNamespace(
        root=root,
        generator=gen,
        generator_path=generator_path,
        pairs_dir=pairs_dir,
        dense_protos=dense_protos,
        sparse_protos=sparse_protos,
        models_dir=models_dir,
        dense_model_dir=models_dir / "shapes-dense",
        sparse_model_dir=models_dir / "shapes-sparse",
        layout_path=layout_path,
        layout=dense_layout,
        config_path=config_path,
        class_names=CLASS_NAMES,
        encoder_config=encoder_config,
    )
