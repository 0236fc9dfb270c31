#!/usr/bin/env python3
"""Walkthrough: train the layout encoder against a frozen generator.

Every iteration draws random noise, renders it with the frozen generator,
pseudo-labels the feature map, and regresses the encoder's codes onto the
mapped latents (plain L2; no gradients reach the generator). Diagnostics
land in ./runs/demo_training/: a loss CSV and periodic three-row sheets
(samples / pseudo masks / reconstructions).
"""

import numpy as np

from layoutsynth import AnalyticShapeGenerator
from layoutsynth.encoder import EncoderConfig, TrainConfig, train
from layoutsynth.prototypes import LabeledPair, dense_prototypes

generator = AnalyticShapeGenerator(seed=0)
z = np.zeros(8, dtype=np.float32)
pair = LabeledPair(mask=generator.analytic_semantics(z), latents=generator.map_latent(z))
prototypes = dense_prototypes(generator, [pair])

md = generator.metadata
result = train(
    generator,
    prototypes,
    TrainConfig(
        iterations=600, batch_size=2, learning_rate=1e-3, seed=0,
        checkpoint_every=300, diagnostic_every=200,
    ),
    EncoderConfig(
        input_channels=prototypes.class_count + 1,
        layer_count=md.layer_count, d_w=md.d_w,
        input_height=md.output_height, input_width=md.output_width,
        base_channels=16,
    ),
    out_dir="runs/demo_training",
)

first, last = np.mean(result.losses[:50]), np.mean(result.losses[-50:])
print(f"loss: first-50 mean {first:.2f} -> last-50 mean {last:.2f}")
print(f"checkpoint: {result.checkpoint_path}")
print("diagnostic sheets: runs/demo_training/diagnostics_step*.png")
