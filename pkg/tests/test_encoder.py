"""Encoder and training-loop contracts: loss conventions, gradients, freeze."""

import numpy as np
import pytest
import torch
import torch.nn as nn

from layoutsynth import AnalyticShapeGenerator
from layoutsynth.encoder import (
    EncoderConfig,
    LayoutEncoder,
    TrainConfig,
    TrainState,
    export_diagnostics,
    latent_l2_loss,
    load_encoder,
    pseudo_label_sample,
    save_encoder,
    train,
    training_step,
)
from layoutsynth.errors import ConfigError, InputError, OptimizationError
from layoutsynth.images import to_uint8
from layoutsynth.labeling import SparseLabelerConfig, label_dense, upscale_mask
from layoutsynth.masks import SemanticMask, colorize
from layoutsynth.prototypes import LabeledPair, dense_prototypes


@pytest.fixture(scope="module")
def analytic():
    return AnalyticShapeGenerator(seed=0)


@pytest.fixture(scope="module")
def protos(analytic):
    z = np.zeros(8, dtype=np.float32)  # one-shot: the canonical sample shows both shapes
    pair = LabeledPair(mask=analytic.analytic_semantics(z), latents=analytic.map_latent(z))
    return dense_prototypes(analytic, [pair])


def encoder_config(base_channels=16):
    return EncoderConfig(
        input_channels=4, layer_count=4, d_w=8,
        input_height=32, input_width=32, base_channels=base_channels,
    )


def make_state(analytic, protos, encoder, lr=1e-3):
    return TrainState(
        encoder=encoder,
        optimizer=torch.optim.Adam(encoder.net.parameters(), lr=lr),
        prototypes=protos,
        generator=analytic,
        sparse_config=SparseLabelerConfig(),
        diagnostic_seeds=[0, 1],
    )


# --- encode -------------------------------------------------------------------


def test_encode_shape_and_determinism(analytic):
    encoder = LayoutEncoder(encoder_config(), init_seed=0)
    mask = analytic.analytic_semantics(np.zeros(8, dtype=np.float32))
    a = encoder.encode(mask)
    b = encoder.encode(mask)
    assert a.codes.shape == (4, 8)
    assert np.array_equal(a.codes, b.codes)


def test_encode_differs_for_different_masks(analytic):
    encoder = LayoutEncoder(encoder_config(), init_seed=0)
    z1 = np.zeros(8, dtype=np.float32)
    z2 = np.zeros(8, dtype=np.float32)
    z2[0] = 2.0  # moves the shape
    a = encoder.encode(analytic.analytic_semantics(z1))
    b = encoder.encode(analytic.analytic_semantics(z2))
    assert not np.array_equal(a.codes, b.codes)


def test_encode_rejects_channel_mismatch():
    encoder = LayoutEncoder(encoder_config(), init_seed=0)
    mask = SemanticMask(np.zeros((32, 32), dtype=np.uint8), 5)  # needs 6 channels
    with pytest.raises(InputError):
        encoder.encode(mask)


# --- loss conventions -----------------------------------------------------------


def test_loss_zero_at_exact_match():
    target = torch.randn(2, 4, 8)
    assert float(latent_l2_loss(target.clone(), target)) == 0.0


def test_loss_single_offset_coordinate_is_one():
    target = torch.randn(1, 4, 8)
    pred = target.clone()
    pred[0, 2, 5] += 1.0
    assert float(latent_l2_loss(pred, target)) == pytest.approx(1.0, abs=1e-6)


def test_loss_batch_mean_layer_sum():
    target = torch.zeros(2, 3, 2)
    pred = torch.zeros(2, 3, 2)
    pred[0] += 1.0  # 6 unit offsets in sample 0 only
    assert float(latent_l2_loss(pred, target)) == pytest.approx(3.0)


# --- training step ----------------------------------------------------------------


class _ConstantEncoder(nn.Module):
    """Outputs a stored code stack regardless of input."""

    def __init__(self, codes: torch.Tensor):
        super().__init__()
        self.codes = nn.Parameter(codes.clone())

    def forward(self, x):
        return self.codes.unsqueeze(0).expand(x.shape[0], -1, -1)


def _rig_state(analytic, protos, codes):
    encoder = LayoutEncoder(encoder_config(), init_seed=0)
    encoder.net = _ConstantEncoder(codes)
    return make_state(analytic, protos, encoder)


def test_training_step_zero_loss_at_target(analytic, protos):
    sample = analytic.sample(5)
    state = _rig_state(analytic, protos, torch.from_numpy(sample.latents.codes))
    before = [p.detach().clone() for p in state.encoder.net.parameters()]
    state, loss = training_step(state, [sample])
    assert loss == 0.0
    for p, b in zip(state.encoder.net.parameters(), before):
        assert torch.equal(p.detach(), b)  # zero gradient at the optimum


def test_training_step_unit_offset_gives_unit_loss(analytic, protos):
    sample = analytic.sample(5)
    codes = torch.from_numpy(sample.latents.codes.copy())
    codes[1, 3] += 1.0
    state = _rig_state(analytic, protos, codes)
    _, loss = training_step(state, [sample])
    assert loss == pytest.approx(1.0, abs=1e-5)


def test_training_step_aborts_on_nonfinite_loss(analytic, protos):
    sample = analytic.sample(5)
    huge = torch.full((4, 8), 1e25)
    state = _rig_state(analytic, protos, huge)
    with pytest.raises(OptimizationError):
        training_step(state, [sample])


def test_training_step_rejects_empty_batch(analytic, protos):
    encoder = LayoutEncoder(encoder_config(), init_seed=0)
    with pytest.raises(InputError):
        training_step(make_state(analytic, protos, encoder), [])


def test_generator_untouched_by_training(analytic, protos):
    encoder = LayoutEncoder(encoder_config(), init_seed=1)
    state = make_state(analytic, protos, encoder)
    before = analytic.weights_hash()
    for seed in range(20):
        state, _ = training_step(state, [analytic.sample(seed)])
    assert analytic.weights_hash() == before


class ProbeEncoder(nn.Module):
    """~1200-parameter encoder used for the finite-difference gradient check."""

    def __init__(self, in_ch=4, layer_count=4, d_w=8):
        super().__init__()
        self.pool = nn.AvgPool2d(8)  # 32x32 -> 4x4
        self.fc1 = nn.Linear(in_ch * 16, 12)
        self.fc2 = nn.Linear(12, layer_count * d_w)
        self.layer_count, self.d_w = layer_count, d_w

    def forward(self, x):
        h = torch.tanh(self.fc1(self.pool(x).flatten(1)))
        return self.fc2(h).view(-1, self.layer_count, self.d_w)


def test_gradient_matches_central_finite_differences(analytic, protos):
    torch.manual_seed(0)
    probe = ProbeEncoder().double()
    n_params = sum(p.numel() for p in probe.parameters())
    assert 900 <= n_params <= 1500

    encoder = LayoutEncoder(encoder_config(), init_seed=0)
    samples = [analytic.sample(s) for s in (3, 4)]
    inputs, targets = [], []
    for sample in samples:
        mask = pseudo_label_sample(sample, protos)
        mask = upscale_mask(mask, 32, 32)
        inputs.append(encoder.mask_to_input(mask))
        targets.append(sample.latents.codes)
    x = torch.from_numpy(np.stack(inputs)).double()
    target = torch.from_numpy(np.stack(targets)).double()

    loss = latent_l2_loss(probe(x), target)
    loss.backward()
    analytic_grad = torch.cat([p.grad.flatten() for p in probe.parameters()]).numpy()

    eps = 1e-5
    flat_params = [p for p in probe.parameters()]
    fd = np.zeros_like(analytic_grad)
    idx = 0
    with torch.no_grad():
        for p in flat_params:
            flat = p.view(-1)
            for j in range(flat.numel()):
                orig = float(flat[j])
                flat[j] = orig + eps
                up = float(latent_l2_loss(probe(x), target))
                flat[j] = orig - eps
                down = float(latent_l2_loss(probe(x), target))
                flat[j] = orig
                fd[idx] = (up - down) / (2 * eps)
                idx += 1
    denom = np.maximum(np.abs(fd), np.abs(analytic_grad))
    rel = np.abs(fd - analytic_grad) / np.maximum(denom, 1e-8)
    assert rel.max() < 1e-4


# --- full loop --------------------------------------------------------------------


def run_train(analytic, protos, iterations, out_dir=None, seed=0):
    cfg = TrainConfig(iterations=iterations, batch_size=2, learning_rate=1e-3,
                      seed=seed, checkpoint_every=10_000, diagnostic_every=10_000)
    return train(analytic, protos, cfg, encoder_config(), out_dir=out_dir)


def test_train_descends(analytic, protos, tmp_path):
    result = run_train(analytic, protos, 200, out_dir=tmp_path)
    assert np.mean(result.losses[-50:]) < np.mean(result.losses[:50])
    assert (tmp_path / "loss.csv").exists()
    lines = (tmp_path / "loss.csv").read_text().strip().splitlines()
    assert lines[0] == "step,loss"
    assert len(lines) == 201
    assert result.checkpoint_path.exists()
    assert (tmp_path / "diagnostics_step200.png").exists()


def test_train_deterministic(analytic, protos):
    a = run_train(analytic, protos, 30, seed=9)
    b = run_train(analytic, protos, 30, seed=9)
    assert a.losses == b.losses


def test_train_rejects_structural_mismatch(analytic, protos):
    bad = EncoderConfig(input_channels=4, layer_count=7, d_w=8,
                        input_height=32, input_width=32)
    with pytest.raises(ConfigError):
        train(analytic, protos, TrainConfig(iterations=1), bad)


def test_checkpoint_round_trip_bit_identical(analytic, protos, tmp_path):
    result = run_train(analytic, protos, 10, out_dir=tmp_path)
    bundle = load_encoder(result.checkpoint_path)
    mask = analytic.analytic_semantics(np.zeros(8, dtype=np.float32))
    a = result.encoder.encode(mask)
    b = bundle.encoder.encode(mask)
    assert np.array_equal(a.codes, b.codes)
    assert bundle.mode == "dense"
    assert bundle.provenance["generator_hash"] == analytic.weights_hash()

    # re-saving the loaded encoder reproduces the archive byte for byte
    save_encoder(bundle.encoder, tmp_path / "again.ckpt", bundle.provenance)
    assert (tmp_path / "again.ckpt").read_bytes() == result.checkpoint_path.read_bytes()


# --- diagnostics -----------------------------------------------------------------


def _sheet_cell(sheet_u8, row, col, size=32, pad=2):
    y = pad + row * (size + pad)
    x = pad + col * (size + pad)
    return sheet_u8[y : y + size, x : x + size]


def test_diagnostics_layout_and_content(analytic, protos):
    seeds = [0, 1, 2, 3]
    trained = run_train(analytic, protos, 15)
    untrained = LayoutEncoder(encoder_config(), init_seed=123)

    sheet_a = to_uint8(export_diagnostics(analytic, trained.encoder, protos, None, seeds))
    sheet_b = to_uint8(export_diagnostics(analytic, untrained, protos, None, seeds))
    assert sheet_a.shape == (3 * 34 + 2, 4 * 34 + 2, 3)  # 3 rows x 4 columns

    for col in range(4):
        for row in (0, 1):  # sample and pseudo-mask rows depend only on seeds
            assert np.array_equal(
                _sheet_cell(sheet_a, row, col), _sheet_cell(sheet_b, row, col)
            )
    assert any(
        not np.array_equal(_sheet_cell(sheet_a, 2, col), _sheet_cell(sheet_b, 2, col))
        for col in range(4)
    )

    # row 2 equals the labeler output recomputed independently
    for col, seed in enumerate(seeds):
        sample = analytic.sample(seed)
        mask = upscale_mask(label_dense(sample.features, protos), 32, 32)
        assert np.array_equal(_sheet_cell(sheet_a, 1, col), colorize(mask))
