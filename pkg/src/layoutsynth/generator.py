"""Frozen style-based generator backends.

Two desk-scale implementations of the same contract:

* ``AnalyticShapeGenerator`` renders one parameterized colored shape per
  sample, so the true per-pixel class of everything it draws is known in
  closed form. The first mapped latent code drives geometry (position, size,
  class, shape kind), the last one drives appearance.
* ``StyleToyGenerator`` is a small trainable style-based network (mapping MLP
  plus a synthesis stack with per-layer latent injection, fixed per-pixel
  noise, and an intermediate feature tap) with adversarial training against a
  toy discriminator.

Both expose: ``map_latent`` (one mapped code broadcast across all layers),
``synthesize`` (deterministic; optional feature capture at the tap layer),
``sample`` (seeded noise to full bundle), checkpoint save/load, and a weight
hash used for provenance checks. A loaded backend is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpoint import Archive, load_archive, save_archive, tensors_digest
from .errors import InputError, UnsupportedBackendError
from .images import load_image
from .masks import SemanticMask


@dataclass(frozen=True)
class GeneratorMetadata:
    d_z: int
    d_w: int
    layer_count: int
    feature_channels: int
    feature_height: int
    feature_width: int
    output_height: int
    output_width: int
    feature_tap_layer: int

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value <= 0 and name != "feature_tap_layer":
                raise InputError(f"metadata field {name} must be positive, got {value}")
        if self.feature_width > self.output_width or self.feature_height > self.output_height:
            raise InputError("feature grid cannot exceed output size")
        if not 0 <= self.feature_tap_layer < self.layer_count:
            raise InputError(
                f"feature_tap_layer {self.feature_tap_layer} outside [0, {self.layer_count})"
            )


@dataclass
class LatentStack:
    """Per-synthesis-layer latent codes, shape (L, D_w)."""

    codes: np.ndarray

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float32)
        if self.codes.ndim != 2:
            raise InputError(f"latent codes must be (L, D_w), got {self.codes.shape}")
        if not np.isfinite(self.codes).all():
            raise InputError("latent codes contain non-finite values")

    @property
    def layer_count(self) -> int:
        return self.codes.shape[0]

    @property
    def dim(self) -> int:
        return self.codes.shape[1]

    @classmethod
    def broadcast(cls, code: np.ndarray, layer_count: int) -> "LatentStack":
        code = np.asarray(code, dtype=np.float32).reshape(-1)
        return cls(np.tile(code, (layer_count, 1)))


@dataclass
class GeneratorSample:
    """One forward pass bundle: seed, image, tap features, latents used."""

    seed: int
    image: np.ndarray  # (3, H, W) float32 in [-1, 1]
    features: np.ndarray  # (Z, H', W') float32
    latents: LatentStack


def default_feature_tap(layer_sizes: list[int], limit: int = 64) -> int:
    """Index of the last synthesis layer whose spatial size fits ``limit``."""
    candidates = [i for i, s in enumerate(layer_sizes) if s <= limit]
    if not candidates:
        raise InputError(f"no synthesis layer at or below {limit}px")
    return candidates[-1]


class GeneratorBackend:
    """Shared contract over the concrete backends."""

    kind: str = "abstract"
    metadata: GeneratorMetadata

    def map_latent(self, z: np.ndarray) -> LatentStack:
        raise NotImplementedError

    def synthesize(
        self, latents: LatentStack, capture_features: bool = False
    ) -> tuple[np.ndarray, np.ndarray | None]:
        raise NotImplementedError

    def sample(self, seed: int) -> GeneratorSample:
        """Seeded standard-normal noise through the full pipeline."""
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(self.metadata.d_z).astype(np.float32)
        latents = self.map_latent(z)
        image, features = self.synthesize(latents, capture_features=True)
        return GeneratorSample(seed=int(seed), image=image, features=features, latents=latents)

    def analytic_semantics(self, z: np.ndarray) -> SemanticMask:
        raise UnsupportedBackendError(f"{self.kind} backend has no closed-form semantics")

    @property
    def supports_gradients(self) -> bool:
        return False

    def named_weights(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def weights_hash(self) -> str:
        return tensors_digest(self.named_weights(), extra=f"{self.kind}|{asdict(self.metadata)}")

    def save(self, path: str | Path) -> None:
        raise NotImplementedError

    def _check_latents(self, latents: LatentStack) -> None:
        if latents.layer_count != self.metadata.layer_count:
            raise InputError(
                f"latent stack has {latents.layer_count} layers, "
                f"generator expects {self.metadata.layer_count}"
            )
        if latents.dim != self.metadata.d_w:
            raise InputError(
                f"latent dimension {latents.dim} != generator d_w {self.metadata.d_w}"
            )

    def _check_noise(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float32).reshape(-1)
        if z.shape[0] != self.metadata.d_z:
            raise InputError(f"noise dimension {z.shape[0]} != generator d_z {self.metadata.d_z}")
        if not np.isfinite(z).all():
            raise InputError("noise vector contains non-finite values")
        return z


# --------------------------------------------------------------------------
# Analytic backend
# --------------------------------------------------------------------------

_BG_COLOR = np.array([-0.75, -0.70, -0.65], dtype=np.float32)
_SHAPE_COLORS = np.array(
    [[0.85, -0.55, -0.50],  # class 1
     [-0.50, -0.45, 0.85]],  # class 2
    dtype=np.float32,
)


@dataclass
class ShapeSpec:
    present: bool
    center_x: float
    center_y: float
    radius: float
    class_id: int
    square: bool


class AnalyticShapeGenerator(GeneratorBackend):
    """Closed-form renderer: a circle (class 1) and a square (class 2) on a
    flat background, each independently present, positioned and sized.

    The mapping network is a stored orthogonal matrix, so the geometry
    parameters recover the noise components exactly for generator-native
    samples. Per-cell feature vectors point along a fixed per-class
    direction (majority class of the covered pixels), which makes
    pseudo-label quality checkable against ``analytic_semantics``. Because a
    typical sample shows both shapes, a single labeled pair can cover the
    whole class vocabulary.
    """

    kind = "analytic-shape-generator"
    semantic_class_count = 3  # background + circle class 1 + square class 2

    def __init__(self, seed: int = 0, metadata: GeneratorMetadata | None = None):
        self.seed = int(seed)
        self.metadata = metadata or GeneratorMetadata(
            d_z=8, d_w=8, layer_count=4,
            feature_channels=8, feature_height=16, feature_width=16,
            output_height=32, output_width=32, feature_tap_layer=3,
        )
        md = self.metadata
        if md.d_z != md.d_w:
            raise InputError("analytic backend requires d_z == d_w")
        rng = np.random.default_rng(self.seed)
        self.mixing = np.linalg.qr(rng.standard_normal((md.d_w, md.d_w)))[0].astype(np.float32)
        # Orthonormal class directions keep cross-class cosine at zero.
        dir_basis = np.linalg.qr(
            rng.standard_normal((md.feature_channels, md.feature_channels))
        )[0].astype(np.float32)
        self.class_dirs = dir_basis[: self.semantic_class_count]
        self.cell_field = (
            0.05 * rng.standard_normal(
                (md.feature_channels, md.feature_height, md.feature_width)
            )
        ).astype(np.float32)

    # geometry lives in the first code, appearance in the last
    def shape_params(self, code: np.ndarray) -> list[ShapeSpec]:
        """Two shape specs, painted in class order (the square wins overlaps)."""
        p = self.mixing.T @ np.asarray(code, dtype=np.float32)
        return [
            ShapeSpec(
                present=bool(p[6] > -1.0),
                center_x=float(0.30 + 0.20 * np.tanh(p[0])),
                center_y=float(0.50 + 0.30 * np.tanh(p[1])),
                radius=float(0.20 + 0.10 * np.tanh(p[2])),
                class_id=1, square=False,
            ),
            ShapeSpec(
                present=bool(p[7] > -1.0),
                center_x=float(0.70 + 0.20 * np.tanh(p[3])),
                center_y=float(0.50 + 0.30 * np.tanh(p[4])),
                radius=float(0.20 + 0.10 * np.tanh(p[5])),
                class_id=2, square=True,
            ),
        ]

    def map_latent(self, z: np.ndarray) -> LatentStack:
        z = self._check_noise(z)
        return LatentStack.broadcast(self.mixing @ z, self.metadata.layer_count)

    @staticmethod
    def _signed_margin(spec: ShapeSpec, height: int, width: int) -> np.ndarray:
        """radius minus distance-to-center at every pixel center (>= 0 inside)."""
        ys = (np.arange(height, dtype=np.float32) + 0.5) / height
        xs = (np.arange(width, dtype=np.float32) + 0.5) / width
        dy = ys[:, None] - spec.center_y
        dx = xs[None, :] - spec.center_x
        if spec.square:
            dist = np.maximum(np.abs(dx), np.abs(dy))
        else:
            dist = np.sqrt(dx * dx + dy * dy)
        return spec.radius - dist

    def _semantics_grid(self, specs: list[ShapeSpec], height: int, width: int) -> np.ndarray:
        labels = np.zeros((height, width), dtype=np.uint8)
        for spec in specs:
            if spec.present:
                labels[self._signed_margin(spec, height, width) >= 0.0] = spec.class_id
        return labels

    def analytic_semantics(self, z: np.ndarray) -> SemanticMask:
        latents = self.map_latent(z)
        specs = self.shape_params(latents.codes[0])
        md = self.metadata
        labels = self._semantics_grid(specs, md.output_height, md.output_width)
        return SemanticMask(labels, self.semantic_class_count, "dense")

    def _render(self, geometry: np.ndarray, appearance: np.ndarray) -> np.ndarray:
        md = self.metadata
        specs = self.shape_params(geometry)
        q = self.mixing.T @ np.asarray(appearance, dtype=np.float32)
        bg = _BG_COLOR + 0.15 * np.tanh(q[0])
        image = np.broadcast_to(
            bg[:, None, None], (3, md.output_height, md.output_width)
        ).astype(np.float32).copy()
        soft = 1.5 / min(md.output_height, md.output_width)
        for spec in specs:
            if not spec.present:
                continue
            margin = self._signed_margin(spec, md.output_height, md.output_width)
            alpha = np.clip(0.5 + margin / soft, 0.0, 1.0)[None]
            color = _SHAPE_COLORS[spec.class_id - 1] + 0.1 * np.tanh(q[1])
            image = image * (1.0 - alpha) + color[:, None, None] * alpha
        return np.clip(image, -1.0, 1.0).astype(np.float32)

    def _features(self, geometry: np.ndarray) -> np.ndarray:
        md = self.metadata
        specs = self.shape_params(geometry)
        full = self._semantics_grid(specs, md.output_height, md.output_width)
        by = md.output_height // md.feature_height
        bx = md.output_width // md.feature_width
        blocks = full.reshape(md.feature_height, by, md.feature_width, bx)
        counts = np.zeros(
            (self.semantic_class_count, md.feature_height, md.feature_width), dtype=np.int64
        )
        for cid in range(self.semantic_class_count):
            counts[cid] = (blocks == cid).sum(axis=(1, 3))
        majority = counts.argmax(axis=0)  # ties resolve to the lowest class id
        gy = (np.arange(md.feature_height, dtype=np.float32)[:, None] + 0.5) / md.feature_height
        gx = (np.arange(md.feature_width, dtype=np.float32)[None, :] + 0.5) / md.feature_width
        scale = 0.8 + 0.4 * (gx + gy) / 2.0
        feats = self.class_dirs[majority].transpose(2, 0, 1) * scale[None]
        return (feats + self.cell_field).astype(np.float32)

    def synthesize(
        self, latents: LatentStack, capture_features: bool = False
    ) -> tuple[np.ndarray, np.ndarray | None]:
        self._check_latents(latents)
        image = self._render(latents.codes[0], latents.codes[-1])
        features = self._features(latents.codes[0]) if capture_features else None
        return image, features

    def named_weights(self) -> dict[str, np.ndarray]:
        return {
            "mixing": self.mixing,
            "class_dirs": self.class_dirs,
            "cell_field": self.cell_field,
        }

    def save(self, path: str | Path) -> None:
        save_archive(
            path, self.kind,
            {"metadata": asdict(self.metadata), "seed": self.seed,
             "class_count": self.semantic_class_count},
            self.named_weights(),
        )

    @classmethod
    def from_archive(cls, archive: Archive) -> "AnalyticShapeGenerator":
        gen = cls(seed=archive.meta["seed"],
                  metadata=GeneratorMetadata(**archive.meta["metadata"]))
        gen.mixing = archive.tensors["mixing"]
        gen.class_dirs = archive.tensors["class_dirs"]
        gen.cell_field = archive.tensors["cell_field"]
        return gen


# --------------------------------------------------------------------------
# Trainable toy style generator (torch)
# --------------------------------------------------------------------------


class MappingNetwork(nn.Module):
    """Normalized noise through a small MLP to the intermediate latent."""

    def __init__(self, d_z: int, d_w: int, depth: int = 3):
        super().__init__()
        layers: list[nn.Module] = []
        for i in range(depth):
            layers.append(nn.Linear(d_z if i == 0 else d_w, d_w))
            layers.append(nn.LeakyReLU(0.2))
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z = z * torch.rsqrt(z.pow(2).mean(dim=1, keepdim=True) + 1e-8)
        return self.net(z)


class SynthesisLayer(nn.Module):
    """Conv + fixed per-pixel noise + per-layer style modulation (AdaIN)."""

    def __init__(self, in_ch: int, out_ch: int, size: int, d_w: int, upsample: bool):
        super().__init__()
        self.upsample = upsample
        self.size = size
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.register_buffer("noise", torch.randn(1, 1, size, size))
        self.noise_strength = nn.Parameter(torch.zeros(()))
        self.style = nn.Linear(d_w, 2 * out_ch)

    def forward(self, x: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
        if self.upsample:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = self.conv(x)
        x = x + self.noise_strength * self.noise
        x = F.leaky_relu(x, 0.2)
        mu = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
        x = (x - mu) * torch.rsqrt(var + 1e-8)
        scale, shift = self.style(w).chunk(2, dim=1)
        return x * (1.0 + scale[:, :, None, None]) + shift[:, :, None, None]


def _layer_plan(output_size: int) -> list[tuple[int, int, int, bool]]:
    """(in_ch, out_ch, size, upsample) per synthesis layer, 4x4 upward."""
    if output_size < 8 or output_size & (output_size - 1):
        raise InputError(f"toy generator output size must be a power of two >= 8, got {output_size}")
    channels = {4: 64, 8: 64, 16: 48, 32: 48, 64: 32}
    plan = [(channels[4], channels[4], 4, False)]
    size = 4
    while size < output_size:
        size *= 2
        plan.append((plan[-1][1], channels[size], size, True))
        plan.append((channels[size], channels[size], size, False))
    plan.append((plan[-1][1], plan[-1][1], size, False))
    return plan


class SynthesisNetwork(nn.Module):
    def __init__(self, d_w: int, output_size: int):
        super().__init__()
        plan = _layer_plan(output_size)
        self.const = nn.Parameter(torch.randn(1, plan[0][0], 4, 4))
        self.layers = nn.ModuleList(
            SynthesisLayer(i, o, s, d_w, up) for i, o, s, up in plan
        )
        self.layer_sizes = [s for _, _, s, _ in plan]
        self.feature_channels = plan[-1][1]
        self.to_rgb = nn.Conv2d(plan[-1][1], 3, 1)

    def forward(
        self, ws: torch.Tensor, capture_layer: int | None = None
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        x = self.const.expand(ws.shape[0], -1, -1, -1)
        features = None
        for i, layer in enumerate(self.layers):
            x = layer(x, ws[:, i])
            if i == capture_layer:
                features = x
        return torch.tanh(self.to_rgb(x)), features


class StyleToyGenerator(GeneratorBackend):
    """Small trainable style-based generator, frozen outside toy training."""

    kind = "style-toy-generator"

    def __init__(self, d_z: int = 64, d_w: int = 64, output_size: int = 32, init_seed: int = 0):
        torch.manual_seed(init_seed)
        self.mapping = MappingNetwork(d_z, d_w)
        self.synthesis = SynthesisNetwork(d_w, output_size)
        tap = default_feature_tap(self.synthesis.layer_sizes)
        self.metadata = GeneratorMetadata(
            d_z=d_z, d_w=d_w, layer_count=len(self.synthesis.layers),
            feature_channels=self.synthesis.feature_channels,
            feature_height=self.synthesis.layer_sizes[tap],
            feature_width=self.synthesis.layer_sizes[tap],
            output_height=output_size, output_width=output_size,
            feature_tap_layer=tap,
        )
        self.freeze()

    @property
    def supports_gradients(self) -> bool:
        return True

    def freeze(self) -> None:
        for module in (self.mapping, self.synthesis):
            module.eval()
            module.requires_grad_(False)
        self._warm_up()

    def _warm_up(self) -> None:
        # prime the conv kernels so the first real call matches later ones
        # bit-for-bit (kernel autotuning may otherwise differ on first use)
        with torch.no_grad():
            ws = torch.zeros(1, self.metadata.layer_count, self.metadata.d_w)
            self.synthesis(ws, capture_layer=self.metadata.feature_tap_layer)

    def trainable_modules(self) -> list[nn.Module]:
        return [self.mapping, self.synthesis]

    # --- differentiable batched paths (used by inversion and training) ----
    def map_latent_t(self, z: torch.Tensor) -> torch.Tensor:
        return self.mapping(z)

    def synthesize_t(
        self, ws: torch.Tensor, capture_features: bool = False
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        if ws.ndim != 3 or ws.shape[1] != self.metadata.layer_count:
            raise InputError(f"expected (B, L, D_w) latents, got {tuple(ws.shape)}")
        capture = self.metadata.feature_tap_layer if capture_features else None
        return self.synthesis(ws, capture_layer=capture)

    # --- numpy contract ----------------------------------------------------
    def map_latent(self, z: np.ndarray) -> LatentStack:
        z = self._check_noise(z)
        with torch.no_grad():
            w = self.mapping(torch.from_numpy(z).unsqueeze(0))[0].numpy()
        return LatentStack.broadcast(w, self.metadata.layer_count)

    def synthesize(
        self, latents: LatentStack, capture_features: bool = False
    ) -> tuple[np.ndarray, np.ndarray | None]:
        self._check_latents(latents)
        ws = torch.from_numpy(latents.codes).unsqueeze(0)
        with torch.no_grad():
            image, features = self.synthesize_t(ws, capture_features)
        return (
            image[0].numpy(),
            features[0].numpy() if features is not None else None,
        )

    def named_weights(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, module in (("mapping", self.mapping), ("synthesis", self.synthesis)):
            for name, tensor in module.state_dict().items():
                out[f"{prefix}.{name}"] = tensor.detach().numpy()
        return out

    def load_named_weights(self, tensors: dict[str, np.ndarray]) -> None:
        for prefix, module in (("mapping", self.mapping), ("synthesis", self.synthesis)):
            state = {}
            for name, ref in module.state_dict().items():
                key = f"{prefix}.{name}"
                if key not in tensors:
                    raise InputError(f"checkpoint missing tensor {key!r}")
                arr = np.asarray(tensors[key], dtype=np.float32)
                if tuple(arr.shape) != tuple(ref.shape):
                    raise InputError(
                        f"tensor {key!r} has shape {arr.shape}, expected {tuple(ref.shape)}"
                    )
                state[name] = torch.from_numpy(arr.copy())
            module.load_state_dict(state)
        self.freeze()

    def save(self, path: str | Path) -> None:
        save_archive(
            path, self.kind,
            {"metadata": asdict(self.metadata),
             "d_z": self.metadata.d_z, "d_w": self.metadata.d_w,
             "output_size": self.metadata.output_width},
            self.named_weights(),
        )

    @classmethod
    def from_archive(cls, archive: Archive) -> "StyleToyGenerator":
        gen = cls(
            d_z=archive.meta["d_z"], d_w=archive.meta["d_w"],
            output_size=archive.meta["output_size"],
        )
        gen.load_named_weights(archive.tensors)
        return gen


def import_style_generator_weights(
    d_z: int, d_w: int, output_size: int,
    external: dict[str, np.ndarray], name_map: dict[str, str],
) -> StyleToyGenerator:
    """Shim for externally published weights: rename onto our tensor names.

    ``name_map`` maps our checkpoint names to keys of ``external``. Shapes
    must already agree; this adapts naming conventions, not architectures.
    """
    gen = StyleToyGenerator(d_z=d_z, d_w=d_w, output_size=output_size)
    tensors = {}
    for ours, theirs in name_map.items():
        if theirs not in external:
            raise InputError(f"external weights missing {theirs!r} (mapped from {ours!r})")
        tensors[ours] = external[theirs]
    missing = set(gen.named_weights()) - set(tensors)
    if missing:
        raise InputError(f"name map does not cover tensors: {sorted(missing)[:4]}...")
    gen.load_named_weights(tensors)
    return gen


def load_generator(path: str | Path) -> GeneratorBackend:
    archive = load_archive(path)
    if archive.kind == AnalyticShapeGenerator.kind:
        return AnalyticShapeGenerator.from_archive(archive)
    if archive.kind == StyleToyGenerator.kind:
        return StyleToyGenerator.from_archive(archive)
    raise InputError(f"{path}: unknown generator kind {archive.kind!r}")


# --------------------------------------------------------------------------
# Adversarial toy training
# --------------------------------------------------------------------------


class MinibatchStd(nn.Module):
    """Appends one channel holding the batch-wide feature std (collapse guard)."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        std = x.std(dim=0, unbiased=False).mean()
        return torch.cat([x, std.expand(x.shape[0], 1, x.shape[2], x.shape[3])], dim=1)


class ToyDiscriminator(nn.Module):
    def __init__(self, input_size: int = 32):
        super().__init__()
        chans = [3, 32, 48, 64]
        blocks: list[nn.Module] = []
        size = input_size
        for cin, cout in zip(chans, chans[1:]):
            blocks += [nn.Conv2d(cin, cout, 3, padding=1), nn.LeakyReLU(0.2),
                       nn.Conv2d(cout, cout, 3, stride=2, padding=1), nn.LeakyReLU(0.2)]
            size //= 2
        self.body = nn.Sequential(*blocks)
        self.tail = nn.Sequential(
            MinibatchStd(),
            nn.Conv2d(chans[-1] + 1, chans[-1], 3, padding=1), nn.LeakyReLU(0.2),
        )
        self.head = nn.Linear(chans[-1] * size * size, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.tail(self.body(x))
        return self.head(h.flatten(1)).squeeze(1)


@dataclass
class ToyGanConfig:
    steps: int = 1200
    batch_size: int = 8
    learning_rate: float = 2.5e-3
    r1_gamma: float = 5.0
    r1_every: int = 16
    seed: int = 0
    log_every: int = 50
    d_z: int = 64
    d_w: int = 64

    def __post_init__(self):
        if self.steps <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise InputError("toy GAN config fields must be positive")


@dataclass
class ToyGanResult:
    generator: StyleToyGenerator
    discriminator: ToyDiscriminator
    history: list[tuple[int, float, float]] = field(default_factory=list)  # (step, d, g)

    @property
    def final_losses(self) -> tuple[float, float]:
        return self.history[-1][1], self.history[-1][2]


def load_image_dataset(path: str | Path) -> np.ndarray:
    """Stack every .png/.jpg under a directory into (N, 3, H, W) floats."""
    files = sorted(
        p for p in Path(path).iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not files:
        raise InputError(f"dataset directory {path} contains no images")
    return np.stack([load_image(p) for p in files])


def train_toy_generator(
    dataset: np.ndarray | str | Path, config: ToyGanConfig | None = None
) -> ToyGanResult:
    """Non-saturating GAN training of the toy generator on unlabeled images.

    Lazy R1 gradient penalty keeps the discriminator in check; everything is
    seeded so two runs on one machine produce identical losses and weights.
    """
    config = config or ToyGanConfig()
    if isinstance(dataset, (str, Path)):
        dataset = load_image_dataset(dataset)
    images = np.asarray(dataset, dtype=np.float32)
    if images.ndim != 4 or images.shape[1] != 3:
        raise InputError(f"dataset must be (N, 3, H, W), got {images.shape}")
    if images.shape[0] == 0:
        raise InputError("dataset is empty")

    gen = StyleToyGenerator(
        d_z=config.d_z, d_w=config.d_w, output_size=images.shape[2], init_seed=config.seed
    )
    if images.shape[2] != gen.metadata.output_height or images.shape[3] != gen.metadata.output_width:
        raise InputError(
            f"dataset images are {images.shape[2]}x{images.shape[3]}, "
            f"generator renders {gen.metadata.output_height}x{gen.metadata.output_width}"
        )
    torch.manual_seed(config.seed)
    disc = ToyDiscriminator(input_size=images.shape[2])
    for module in gen.trainable_modules():
        module.train()
        module.requires_grad_(True)

    # the mapping network trains an order of magnitude slower, as is usual
    # for style-based generators
    opt_g = torch.optim.Adam(
        [
            {"params": list(gen.synthesis.parameters())},
            {"params": list(gen.mapping.parameters()), "lr": config.learning_rate * 0.1},
        ],
        lr=config.learning_rate, betas=(0.0, 0.99),
    )
    opt_d = torch.optim.Adam(disc.parameters(), lr=config.learning_rate, betas=(0.0, 0.99))

    rng = np.random.default_rng(config.seed)
    data = torch.from_numpy(images)
    history: list[tuple[int, float, float]] = []
    layer_count = gen.metadata.layer_count

    for step in range(config.steps):
        idx = rng.integers(0, len(images), size=config.batch_size)
        real = data[idx]
        z = torch.from_numpy(
            rng.standard_normal((config.batch_size, config.d_z)).astype(np.float32)
        )

        # discriminator update
        with torch.no_grad():
            ws = gen.map_latent_t(z).unsqueeze(1).expand(-1, layer_count, -1)
            fake, _ = gen.synthesize_t(ws)
        d_real = disc(real)
        d_fake = disc(fake)
        loss_d = (F.softplus(-d_real) + F.softplus(d_fake)).mean()
        if config.r1_gamma > 0 and step % config.r1_every == 0:
            real_rq = real.detach().requires_grad_(True)
            d_r1 = disc(real_rq)
            (grad,) = torch.autograd.grad(d_r1.sum(), real_rq, create_graph=True)
            loss_d = loss_d + 0.5 * config.r1_gamma * grad.pow(2).sum(dim=(1, 2, 3)).mean()
        opt_d.zero_grad(set_to_none=True)
        loss_d.backward()
        opt_d.step()

        # generator update
        ws = gen.map_latent_t(z).unsqueeze(1).expand(-1, layer_count, -1)
        fake, _ = gen.synthesize_t(ws)
        loss_g = F.softplus(-disc(fake)).mean()
        opt_g.zero_grad(set_to_none=True)
        loss_g.backward()
        opt_g.step()

        if step % config.log_every == 0 or step == config.steps - 1:
            history.append((step, float(loss_d.detach()), float(loss_g.detach())))

    gen.freeze()
    disc.eval()
    disc.requires_grad_(False)
    return ToyGanResult(generator=gen, discriminator=disc, history=history)
