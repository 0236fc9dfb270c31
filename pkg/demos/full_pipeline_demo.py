#!/usr/bin/env python3
"""Walkthrough: the whole CLI pipeline at desk scale, ending with a model
bundle the studio server can load.

Stages (all driven through the CLI so each leaves a provenance manifest):
  1. render an unlabeled shape dataset and adversarially train the toy
     style generator on it,
  2. extract one-shot dense prototypes from a single labeled pair,
  3. write a few pseudo-labeled mask/image pairs,
  4. train the layout encoder,
  5. synthesize variants from a drawn layout and score them,
  6. assemble runs/demo_pipeline/model/default/ for `layoutsynth serve`.

The toy GAN step dominates the runtime (a few minutes on a laptop CPU).
"""

import json
import shutil
from pathlib import Path

import numpy as np

from layoutsynth import AnalyticShapeGenerator
from layoutsynth.cli import main
from layoutsynth.images import save_image
from layoutsynth.generator import load_generator
from layoutsynth.masks import SemanticMask, save_mask

CLASSES = ["background", "blob", "box"]
root = Path("runs/demo_pipeline")
root.mkdir(parents=True, exist_ok=True)

# -- 1. unlabeled dataset ----------------------------------------------------
analytic = AnalyticShapeGenerator(seed=0)
dataset = root / "dataset"
if not dataset.exists():
    dataset.mkdir()
    for i in range(256):
        save_image(analytic.sample(20000 + i).image, dataset / f"img_{i:04d}.png")
    print(f"rendered {dataset} (256 images)")

config = root / "config.yaml"
config.write_text(f"""
seed: 7
mode: dense
out_dir: {root}/out
paths:
  dataset: {dataset}
  generator: {root}/out/generator.ckpt
  prototypes: {root}/out/prototypes.ckpt
  encoder: {root}/out/encoder.ckpt
  pairs_manifest: {root}/pairs/manifest.json
toy_gan: {{steps: 1500, batch_size: 8}}
train: {{iterations: 2000, batch_size: 2, learning_rate: 0.001, checkpoint_every: 1000, diagnostic_every: 500}}
encoder: {{base_channels: 32}}
synthesis: {{mix_layers: 8, variant_count: 3}}
""")

run = lambda *argv: main([str(a) for a in argv])  # noqa: E731

assert run("train-toy-gan", "--config", config) == 0

# -- 2. one labeled pair: annotate one generated sample by its colors --------
generator = load_generator(root / "out" / "generator.ckpt")
colors = np.array([[-0.75, -0.70, -0.65], [0.85, -0.55, -0.50], [-0.50, -0.45, 0.85]],
                  dtype=np.float32)
pairs = root / "pairs"
pairs.mkdir(exist_ok=True)
for seed in range(9000, 9100):
    sample = generator.sample(seed)
    dist = ((sample.image[None] - colors[:, :, None, None]) ** 2).sum(axis=1)
    labels = dist.argmin(axis=0).astype(np.uint8)
    if (np.bincount(labels.ravel(), minlength=3) >= 20).all():
        save_mask(SemanticMask(labels, 3, "dense"), pairs / "pair0_mask.png", CLASSES)
        np.save(pairs / "pair0_latents.npy", sample.latents.codes)
        print(f"annotated generated sample {seed} as the one-shot pair")
        break
(pairs / "manifest.json").write_text(json.dumps({
    "classes": CLASSES,
    "pairs": [{"mask": "pair0_mask.png", "latents": "pair0_latents.npy"}],
}, indent=2))

assert run("extract-prototypes", "--config", config) == 0
assert run("pseudo-label", "--config", config, "--count", "8") == 0
assert run("train-encoder", "--config", config) == 0

# -- 5. synthesize from the pair's own mask as a sanity layout ---------------
assert run("synthesize", "--config", config, "--mask", pairs / "pair0_mask.png",
           "--seed", "11") == 0

# -- 6. model bundle for the studio ------------------------------------------
model_dir = root / "model" / "default"
model_dir.mkdir(parents=True, exist_ok=True)
for name in ("generator.ckpt", "prototypes.ckpt", "encoder.ckpt"):
    shutil.copyfile(root / "out" / name, model_dir / name)
print(f"""
done. artifacts under {root}/out, model bundle under {root}/model.
next:
  layoutsynth serve --models {root}/model --origins http://127.0.0.1:5173
  (cd frontend && npm run build && npm run serve)   # then open http://127.0.0.1:5173
""")
