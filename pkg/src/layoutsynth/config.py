"""Run configuration: one YAML file reproduces one experiment end to end.

Command-line overrides use dotted paths (``--set train.iterations=500``).
Validation errors always name the offending field.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .encoder import TrainConfig
from .errors import ConfigError
from .generator import ToyGanConfig
from .labeling import SparseLabelerConfig


@dataclass
class ConfigPaths:
    generator: str | None = None
    encoder: str | None = None
    prototypes: str | None = None
    pairs_manifest: str | None = None
    dataset: str | None = None


@dataclass
class SynthesisSettings:
    mix_layers: int | None = None
    variant_count: int = 1


@dataclass
class EncoderSettings:
    base_channels: int = 32


@dataclass
class RunConfig:
    seed: int = 0
    mode: str = "dense"
    out_dir: str = "runs/out"
    paths: ConfigPaths = field(default_factory=ConfigPaths)
    sparse_labeler: SparseLabelerConfig = field(default_factory=SparseLabelerConfig)
    toy_gan: ToyGanConfig = field(default_factory=ToyGanConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: EncoderSettings = field(default_factory=EncoderSettings)
    synthesis: SynthesisSettings = field(default_factory=SynthesisSettings)
    metrics: list[str] = field(default_factory=lambda: ["miou", "fwiou", "accuracy"])

    def __post_init__(self):
        if self.mode not in ("dense", "sparse"):
            raise ConfigError(f"mode: must be 'dense' or 'sparse', got {self.mode!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def require_paths(self, *names: str) -> None:
        """Check the named checkpoint/data paths exist; name the bad field."""
        for name in names:
            value = getattr(self.paths, name)
            if not value:
                raise ConfigError(f"paths.{name}: required by this command but not set")
            if not Path(value).exists():
                raise ConfigError(f"paths.{name}: {value} does not exist")


_SECTIONS = {
    "paths": ConfigPaths,
    "sparse_labeler": SparseLabelerConfig,
    "toy_gan": ToyGanConfig,
    "train": TrainConfig,
    "encoder": EncoderSettings,
    "synthesis": SynthesisSettings,
}


def _build_section(cls, data: dict, prefix: str):
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}: unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    kwargs = {}
    top_names = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in data.items():
        if key not in top_names:
            raise ConfigError(f"{key}: unknown field")
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a mapping")
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    try:
        config = RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    # sub-seeds follow the global seed unless explicitly set
    if "toy_gan" not in data or "seed" not in data.get("toy_gan", {}):
        config.toy_gan.seed = config.seed
    if "train" not in data or "seed" not in data.get("train", {}):
        config.train.seed = config.seed
    return config


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path}: {exc}")
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ConfigError(f"config file {path}: top level must be a mapping")
            data = loaded
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key.path=value")
        key, raw = item.split("=", 1)
        target = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {key}: {part} is not a section")
        target[parts[-1]] = yaml.safe_load(raw)
    return config_from_dict(data)
