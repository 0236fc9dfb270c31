#!/usr/bin/env python3
"""Walkthrough: from one labeled pair to pseudo semantic masks.

Uses the analytic backend so everything is instant and the "ground truth"
is known in closed form. Writes a side-by-side sheet of generated images,
dense pseudo masks, and sparse pseudo masks under ./runs/demo_pseudo/.
"""

import numpy as np

from layoutsynth import AnalyticShapeGenerator
from layoutsynth.images import save_image, tile_sheet, to_uint8
from layoutsynth.labeling import SparseLabelerConfig, label_dense, label_sparse, upscale_mask
from layoutsynth.masks import UNKNOWN, SemanticMask, colorize
from layoutsynth.prototypes import LabeledPair, dense_prototypes, sparse_prototypes
from pathlib import Path

out = Path("runs/demo_pseudo")
out.mkdir(parents=True, exist_ok=True)

generator = AnalyticShapeGenerator(seed=0)

# One labeled pair: the canonical sample (z = 0) renders both shapes, so a
# single annotation covers the whole 3-class vocabulary.
z = np.zeros(8, dtype=np.float32)
dense_mask = generator.analytic_semantics(z)
latents = generator.map_latent(z)
pair = LabeledPair(mask=dense_mask, latents=latents)
dense_protos = dense_prototypes(generator, [pair])
print(f"dense prototypes: {dense_protos.class_count} classes, dim {dense_protos.dim}")

# A sparse version of the same annotation: a few pixels per class.
rng = np.random.default_rng(0)
labels = np.full(dense_mask.labels.shape, UNKNOWN, dtype=np.uint8)
for cid in range(3):
    ys, xs = np.nonzero(dense_mask.labels == cid)
    for idx in rng.choice(len(ys), size=5, replace=False):
        labels[ys[idx], xs[idx]] = cid
sparse_pair = LabeledPair(mask=SemanticMask(labels, 3, "sparse"), latents=latents)
sparse_protos = sparse_prototypes(generator, [sparse_pair])
print(f"sparse prototypes: {sparse_protos.entry_count} annotated pixels")

# Pseudo-label a few fresh samples with both flavors. The sparse labeler
# keeps only confident top-k matches (k=3, t=0.5 defaults), so its masks
# stay sparse like real scribbles.
rows = [[], [], []]
for seed in range(6):
    sample = generator.sample(seed)
    dense = label_dense(sample.features, dense_protos)
    sparse = label_sparse(sample.features, sparse_protos, SparseLabelerConfig())
    rows[0].append(to_uint8(sample.image))
    rows[1].append(colorize(upscale_mask(dense, 32, 32)))
    rows[2].append(colorize(upscale_mask(sparse, 32, 32)))

sheet = tile_sheet(rows)
save_image((sheet.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1), out / "pseudo_labels.png")
print(f"wrote {out / 'pseudo_labels.png'} (rows: samples / dense / sparse)")
