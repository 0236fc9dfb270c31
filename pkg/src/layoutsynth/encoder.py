"""Layout encoder: semantic mask in, per-layer latent codes out.

The encoder is a three-scale feature pyramid with one small head per
generator layer (coarse layers read the coarsest pyramid level). Training
never touches the generator: each iteration samples the frozen generator,
pseudo-labels the sampled feature map, feeds the mask back through the
encoder, and regresses the encoder's codes onto the mapped latents with a
plain L2 loss (sum over layers and latent dimensions, mean over the batch).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpoint import load_archive, save_archive, tensors_digest
from .errors import ConfigError, InputError, OptimizationError
from .generator import GeneratorBackend, GeneratorSample, LatentStack
from .images import save_image, tile_sheet, to_uint8
from .labeling import SparseLabelerConfig, label_dense, label_sparse, upscale_mask
from .masks import SemanticMask, colorize
from .prototypes import (
    DenseVectorSet,
    SparseVectorSet,
    VectorSet,
    resize_mask_to_feature_grid,
)


@dataclass
class EncoderConfig:
    input_channels: int  # class count + 1 (UNKNOWN channel)
    layer_count: int
    d_w: int
    input_height: int
    input_width: int
    base_channels: int = 32

    def __post_init__(self):
        if self.input_channels < 2:
            raise InputError(f"input_channels must be >= 2, got {self.input_channels}")
        for name in ("layer_count", "d_w", "input_height", "input_width", "base_channels"):
            if getattr(self, name) <= 0:
                raise InputError(f"encoder config field {name} must be positive")


@dataclass
class TrainConfig:
    iterations: int = 100_000
    batch_size: int = 2
    learning_rate: float = 0.0001
    optimizer: str = "adam"
    seed: int = 0
    checkpoint_every: int = 10_000
    diagnostic_every: int = 10_000

    def __post_init__(self):
        for name in ("iterations", "batch_size", "learning_rate",
                     "checkpoint_every", "diagnostic_every"):
            if getattr(self, name) <= 0:
                raise InputError(f"train config field {name} must be positive")


class _Map2Style(nn.Module):
    """Stride-2 conv chain down to 1x1, then a linear head to one code."""

    def __init__(self, channels: int, d_w: int, spatial: int):
        super().__init__()
        blocks: list[nn.Module] = []
        size = spatial
        while size > 1:
            blocks += [nn.Conv2d(channels, channels, 3, stride=2, padding=1),
                       nn.LeakyReLU(0.2)]
            size = (size + 1) // 2
        self.body = nn.Sequential(*blocks)
        self.head = nn.Linear(channels, d_w)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.body(x).flatten(1))


class PyramidEncoderNet(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        ch = config.base_channels
        c1, c2, c3 = ch, ch * 3 // 2, ch * 2
        self.stem = nn.Sequential(
            nn.Conv2d(config.input_channels, c1, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(c1, c1, 3, padding=1), nn.LeakyReLU(0.2),
        )
        self.down1 = nn.Sequential(
            nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(c2, c2, 3, padding=1), nn.LeakyReLU(0.2),
        )
        self.down2 = nn.Sequential(
            nn.Conv2d(c2, c3, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(c3, c3, 3, padding=1), nn.LeakyReLU(0.2),
        )
        # coarse generator layers read the smallest map, fine layers the largest
        L = config.layer_count
        coarse_end, mid_end = L // 3, 2 * L // 3
        sizes = {
            "coarse": (c3, config.input_height // 4),
            "mid": (c2, config.input_height // 2),
            "fine": (c1, config.input_height),
        }
        self.assignment = [
            "coarse" if i < coarse_end else "mid" if i < mid_end else "fine"
            for i in range(L)
        ]
        self.heads = nn.ModuleList(
            _Map2Style(sizes[level][0], config.d_w, sizes[level][1])
            for level in self.assignment
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f_fine = self.stem(x)
        f_mid = self.down1(f_fine)
        f_coarse = self.down2(f_mid)
        levels = {"fine": f_fine, "mid": f_mid, "coarse": f_coarse}
        codes = [head(levels[level]) for head, level in zip(self.heads, self.assignment)]
        return torch.stack(codes, dim=1)  # (B, L, d_w)


class LayoutEncoder:
    """Typed wrapper: SemanticMask in, LatentStack out; owns the torch net."""

    def __init__(self, config: EncoderConfig, init_seed: int = 0):
        self.config = config
        torch.manual_seed(init_seed)
        self.net = PyramidEncoderNet(config)
        self.net.eval()

    def mask_to_input(self, mask: SemanticMask) -> np.ndarray:
        if mask.class_count + 1 != self.config.input_channels:
            raise InputError(
                f"mask with {mask.class_count} classes does not fit encoder "
                f"input_channels {self.config.input_channels}"
            )
        h, w = self.config.input_height, self.config.input_width
        if (mask.height, mask.width) != (h, w):
            if mask.height <= h and mask.width <= w:
                mask = upscale_mask(mask, w, h)
            else:
                mask = resize_mask_to_feature_grid(mask, w, h)
        return mask.one_hot(include_unknown=True)

    def encode(self, mask: SemanticMask) -> LatentStack:
        x = torch.from_numpy(self.mask_to_input(mask)).unsqueeze(0)
        with torch.no_grad():
            codes = self.net(x)[0].numpy()
        return LatentStack(codes)

    def named_weights(self) -> dict[str, np.ndarray]:
        return {k: v.detach().numpy() for k, v in self.net.state_dict().items()}

    def weights_hash(self) -> str:
        return tensors_digest(self.named_weights(), extra=json.dumps(asdict(self.config)))


def latent_l2_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Sum of squared code errors over layers and dimensions, batch mean."""
    return (pred - target).pow(2).sum(dim=(1, 2)).mean()


def pseudo_label_sample(
    sample: GeneratorSample,
    prototypes: VectorSet,
    sparse_config: SparseLabelerConfig | None = None,
) -> SemanticMask:
    """Label a generator sample's feature map per the prototype kind."""
    if isinstance(prototypes, DenseVectorSet):
        return label_dense(sample.features, prototypes)
    return label_sparse(sample.features, prototypes, sparse_config)


class _Lookahead:
    """Slow/fast weight averaging wrapper (the 'ranger' optimizer mode)."""

    def __init__(self, base: torch.optim.Optimizer, k: int = 6, alpha: float = 0.5):
        self.base = base
        self.k = k
        self.alpha = alpha
        self._step = 0
        self._slow = [
            p.detach().clone() for group in base.param_groups for p in group["params"]
        ]

    def zero_grad(self, set_to_none: bool = True) -> None:
        self.base.zero_grad(set_to_none=set_to_none)

    def step(self) -> None:
        self.base.step()
        self._step += 1
        if self._step % self.k == 0:
            params = [p for group in self.base.param_groups for p in group["params"]]
            for slow, fast in zip(self._slow, params):
                slow.add_(fast.detach() - slow, alpha=self.alpha)
                fast.data.copy_(slow)


def build_optimizer(name: str, params, lr: float):
    name = name.lower()
    if name == "adam":
        return torch.optim.Adam(params, lr=lr)
    if name == "adamw":
        return torch.optim.AdamW(params, lr=lr)
    if name == "radam":
        return torch.optim.RAdam(params, lr=lr)
    if name == "ranger":
        return _Lookahead(torch.optim.RAdam(params, lr=lr))
    raise ConfigError(f"train.optimizer: unknown optimizer {name!r}")


@dataclass
class TrainState:
    encoder: LayoutEncoder
    optimizer: object
    prototypes: VectorSet
    generator: GeneratorBackend
    sparse_config: SparseLabelerConfig
    diagnostic_seeds: list[int]
    step: int = 0
    recent_losses: list[float] = field(default_factory=list)
    dump_dir: Path | None = None

    @property
    def mode(self) -> str:
        return "dense" if isinstance(self.prototypes, DenseVectorSet) else "sparse"


def training_step(state: TrainState, batch: list[GeneratorSample]) -> tuple[TrainState, float]:
    """One optimizer update on the encoder; the generator receives no gradients."""
    if not batch:
        raise InputError("training batch is empty")
    md = state.generator.metadata
    inputs, targets = [], []
    for sample in batch:
        mask = pseudo_label_sample(sample, state.prototypes, state.sparse_config)
        mask = upscale_mask(mask, md.output_width, md.output_height)
        inputs.append(state.encoder.mask_to_input(mask))
        targets.append(sample.latents.codes)
    x = torch.from_numpy(np.stack(inputs))
    target = torch.from_numpy(np.stack(targets))  # constant: no generator gradients
    state.encoder.net.train()
    pred = state.encoder.net(x)
    loss = latent_l2_loss(pred, target)
    if not torch.isfinite(loss):
        _dump_failure(state)
        raise OptimizationError(
            f"non-finite loss at step {state.step}; "
            f"recent losses: {state.recent_losses[-10:]}"
        )
    state.optimizer.zero_grad(set_to_none=True)
    loss.backward()
    state.optimizer.step()
    state.encoder.net.eval()
    state.step += 1
    value = float(loss.detach())
    state.recent_losses.append(value)
    if len(state.recent_losses) > 200:
        del state.recent_losses[:100]
    return state, value


def _dump_failure(state: TrainState) -> None:
    if state.dump_dir is None:
        return
    state.dump_dir.mkdir(parents=True, exist_ok=True)
    (state.dump_dir / f"abort_step{state.step}.json").write_text(
        json.dumps({"step": state.step, "recent_losses": state.recent_losses[-50:]})
    )


@dataclass
class TrainResult:
    encoder: LayoutEncoder
    losses: list[float]
    checkpoint_path: Path | None
    provenance: dict


def train(
    generator: GeneratorBackend,
    prototypes: VectorSet,
    train_config: TrainConfig | None = None,
    encoder_config: EncoderConfig | None = None,
    sparse_config: SparseLabelerConfig | None = None,
    out_dir: str | Path | None = None,
    class_names: list[str] | None = None,
) -> TrainResult:
    """Full training loop: sample, pseudo-label, encode, latent L2, update.

    Writes ``encoder.ckpt``, an append-only ``loss.csv`` and periodic
    checkpoints/diagnostic sheets under ``out_dir`` when given.
    """
    train_config = train_config or TrainConfig()
    md = generator.metadata
    sparse_config = sparse_config or SparseLabelerConfig()
    if encoder_config is None:
        encoder_config = EncoderConfig(
            input_channels=prototypes.class_count + 1,
            layer_count=md.layer_count,
            d_w=md.d_w,
            input_height=md.output_height,
            input_width=md.output_width,
        )
    if encoder_config.layer_count != md.layer_count or encoder_config.d_w != md.d_w:
        raise ConfigError("encoder config disagrees with generator metadata on L or d_w")

    encoder = LayoutEncoder(encoder_config, init_seed=train_config.seed)
    params = list(encoder.net.parameters())
    optimizer = build_optimizer(train_config.optimizer, params, train_config.learning_rate)
    rng = np.random.default_rng(train_config.seed)
    diagnostic_seeds = [int(s) for s in
                        np.random.SeedSequence([train_config.seed, 0xD1A6]).generate_state(4)]
    out_path = Path(out_dir) if out_dir is not None else None
    state = TrainState(
        encoder=encoder, optimizer=optimizer, prototypes=prototypes,
        generator=generator, sparse_config=sparse_config,
        diagnostic_seeds=diagnostic_seeds, dump_dir=out_path,
    )
    provenance = {
        "generator_hash": generator.weights_hash(),
        "prototypes_hash": prototypes.digest(),
        "mode": state.mode,
        "sparse_labeler": asdict(sparse_config),
        "train_config": asdict(train_config),
        "class_names": class_names or [f"class_{i}" for i in range(prototypes.class_count)],
    }

    losses: list[float] = []
    loss_writer = None
    loss_file = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        loss_file = (out_path / "loss.csv").open("a", newline="")
        loss_writer = csv.writer(loss_file)
        loss_writer.writerow(["step", "loss"])

    try:
        for it in range(train_config.iterations):
            seeds = rng.integers(0, 2**31 - 1, size=train_config.batch_size)
            batch = [generator.sample(int(s)) for s in seeds]
            state, loss = training_step(state, batch)
            losses.append(loss)
            if loss_writer is not None:
                loss_writer.writerow([state.step, f"{loss:.8f}"])
            if out_path is not None:
                last = it == train_config.iterations - 1
                if state.step % train_config.checkpoint_every == 0 and not last:
                    save_encoder(encoder, out_path / f"encoder_step{state.step}.ckpt", provenance)
                if state.step % train_config.diagnostic_every == 0 or last:
                    sheet = export_diagnostics(
                        generator, encoder, prototypes, sparse_config, diagnostic_seeds
                    )
                    save_image(sheet, out_path / f"diagnostics_step{state.step}.png")
    finally:
        if loss_file is not None:
            loss_file.close()

    checkpoint_path = None
    if out_path is not None:
        checkpoint_path = out_path / "encoder.ckpt"
        save_encoder(encoder, checkpoint_path, provenance)
    return TrainResult(
        encoder=encoder, losses=losses, checkpoint_path=checkpoint_path, provenance=provenance
    )


def export_diagnostics(
    generator: GeneratorBackend,
    encoder: LayoutEncoder,
    prototypes: VectorSet,
    sparse_config: SparseLabelerConfig | None,
    seeds: list[int],
) -> np.ndarray:
    """Three-row sheet per seed: sample, its pseudo mask, the reconstruction.

    Rows one and two depend only on the generator and prototypes; row three
    is the encoder's current attempt at reproducing the sample from its own
    pseudo mask. Returned as a (3, H, W) float image ready for save_image.
    """
    md = generator.metadata
    row_img, row_mask, row_recon = [], [], []
    for seed in seeds:
        sample = generator.sample(seed)
        mask = pseudo_label_sample(sample, prototypes, sparse_config)
        mask_full = upscale_mask(mask, md.output_width, md.output_height)
        latents = encoder.encode(mask_full)
        recon, _ = generator.synthesize(latents)
        row_img.append(to_uint8(sample.image))
        row_mask.append(colorize(mask_full))
        row_recon.append(to_uint8(recon))
    sheet = tile_sheet([row_img, row_mask, row_recon])
    return (sheet.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


def save_encoder(encoder: LayoutEncoder, path: str | Path, provenance: dict) -> None:
    meta = {"encoder_config": asdict(encoder.config), "provenance": provenance}
    save_archive(path, "layout-encoder", meta, encoder.named_weights())


@dataclass
class EncoderBundle:
    encoder: LayoutEncoder
    provenance: dict

    @property
    def mode(self) -> str:
        return self.provenance["mode"]

    @property
    def class_names(self) -> list[str]:
        return self.provenance.get("class_names", [])

    @property
    def sparse_config(self) -> SparseLabelerConfig:
        cfg = self.provenance.get("sparse_labeler", {})
        return SparseLabelerConfig(**cfg) if cfg else SparseLabelerConfig()


def load_encoder(path: str | Path) -> EncoderBundle:
    archive = load_archive(path)
    if archive.kind != "layout-encoder":
        raise InputError(f"{path}: not an encoder checkpoint (kind {archive.kind!r})")
    config = EncoderConfig(**archive.meta["encoder_config"])
    encoder = LayoutEncoder(config)
    state = {}
    for name, ref in encoder.net.state_dict().items():
        if name not in archive.tensors:
            raise InputError(f"encoder checkpoint missing tensor {name!r}")
        state[name] = torch.from_numpy(archive.tensors[name].copy())
    encoder.net.load_state_dict(state)
    encoder.net.eval()
    encoder.net.requires_grad_(False)
    return EncoderBundle(encoder=encoder, provenance=archive.meta["provenance"])
