"""
Run configuration — one Pydantic v2 model per TOML section.

A run config is plain key-value TOML with the sections ``[dataset]``,
``[schedule]``, ``[autoencoder]``, ``[generator]``, ``[discriminator]``,
``[objectives]``, ``[training]`` and ``[sampling]``.  Unknown keys are
rejected; every default lives on the models below (the CIFAR-10
settings where one exists).

Usage
-----
::

    from src.lddgan.config import load_run_config, dump_run_config

    cfg = load_run_config("configs/gaussians25.toml")
    print(dump_run_config(cfg))          # fully resolved TOML

Seed precedence: explicit override > ``[training] seed`` > ``LDDGAN_SEED``
environment variable (``.env`` is honoured) > 0.
"""
from __future__ import annotations

import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal

import tomli_w
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.lddgan._errors import ConfigError
from src.lddgan.objectives.losses import LossMode, WeightedLearningConfig

load_dotenv()

NetMode = Literal["grid", "vector"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


# ─────────────────────────── sections ────────────────────────────────────────


class DatasetSpec(_Section):
    """Where training data comes from.  Synthetic kinds are fixed by (count, seed)."""

    kind: Literal["gaussians25", "toy_images", "image_dir", "tensor_file"] = "gaussians25"
    path: str | None = None
    count: int = Field(default=25_000, ge=1)
    seed: int = 0
    image_size: int = Field(default=16, ge=2, description="Side length for toy_images")
    normalize: bool = Field(default=True, description="Map pixels to [-1, 1]")

    @model_validator(mode="after")
    def _path_required(self) -> DatasetSpec:
        if self.kind in ("image_dir", "tensor_file") and not self.path:
            raise ValueError(f"dataset kind {self.kind!r} requires a path")
        return self

    @property
    def is_image(self) -> bool:
        return self.kind in ("toy_images", "image_dir")


class ScheduleConfig(_Section):
    T: int = Field(default=4, ge=1, le=64)
    beta_min: float = Field(default=0.1, gt=0.0, lt=1.0)
    beta_max: float = Field(default=0.9999, gt=0.0, lt=1.0)
    kind: Literal["linear", "geometric"] = "linear"
    strict: bool = True

    @model_validator(mode="after")
    def _ordered(self) -> ScheduleConfig:
        if self.beta_min > self.beta_max:
            raise ValueError(f"beta_min {self.beta_min} > beta_max {self.beta_max}")
        return self


class AutoencoderConfig(_Section):
    f: Literal[2, 4, 8] = 2
    image_channels: int = Field(default=1, ge=1)
    latent_channels: int = Field(default=4, ge=1)
    base_channels: int = Field(default=32, ge=1)
    use_kl_penalty: bool = False
    kl_weight: float = Field(default=1e-3, ge=0.0)
    use_patch_adversarial: bool = False
    patch_weight: float = Field(default=0.1, ge=0.0)
    lr: float = Field(default=2e-4, gt=0.0)
    batch_size: int = Field(default=8, ge=1)
    num_epochs: int = Field(default=200, ge=1)
    mse_target: float = Field(default=0.01, gt=0.0)


class GeneratorConfig(_Section):
    mode: NetMode = "grid"
    in_channels: int = Field(default=4, ge=1, description="Latent channels (grid mode)")
    data_dim: int = Field(default=2, ge=1, description="Point dimension (vector mode)")
    base_channels: int = Field(default=64, ge=1)
    channel_multipliers: list[int] = Field(default_factory=lambda: [1, 2, 2], min_length=1)
    num_res_blocks: int = Field(default=2, ge=1)
    z_dim: int = Field(default=25, ge=1)
    z_mapping_layers: int = Field(default=4, ge=1)
    z_embed_dim: int = Field(default=256, ge=1)
    time_embed_dim: int = Field(default=128, ge=2)
    attention_resolutions: list[int] = Field(default_factory=list)
    hidden_dim: int = Field(default=256, ge=1, description="Width (vector mode)")
    num_layers: int = Field(default=3, ge=1, description="Residual blocks (vector mode)")


class DiscriminatorConfig(_Section):
    mode: NetMode = "grid"
    in_channels: int = Field(default=4, ge=1)
    data_dim: int = Field(default=2, ge=1)
    channels: list[int] = Field(default_factory=lambda: [64, 128, 256], min_length=1)
    time_embed_dim: int = Field(default=128, ge=2)
    hidden_dim: int = Field(default=256, ge=1)
    num_layers: int = Field(default=3, ge=1)


class ObjectivesConfig(_Section):
    mode: LossMode = "weighted"
    delta: float = Field(default=10.0, gt=0.0)
    fixed_lambda: float = Field(default=1.0, ge=0.0)
    rec_norm: Literal["l1", "l2"] = "l1"
    r1_gamma: float = Field(default=0.05, ge=0.0)
    lazy_interval: int = Field(default=15, ge=1)
    unbounded_d_loss: bool = Field(default=False, description="Use the log-ratio D loss")


class TrainConfig(_Section):
    lr_g: float = Field(default=1.6e-4, gt=0.0)
    lr_d: float = Field(default=1.25e-4, gt=0.0)
    beta1: float = Field(default=0.5, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.9, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=256, ge=1)
    num_epochs: int = Field(default=100, ge=1)
    ema_decay: float = Field(default=0.9999, gt=0.0, lt=1.0)
    seed: int | None = None
    checkpoint_every: int = Field(default=0, ge=0, description="Epochs; 0 = final only")
    output_dir: str = "runs/default"
    ae_checkpoint: str | None = None
    threads: int = Field(default=1, ge=1)
    log_wall_clock: bool = Field(
        default=False, description="Write elapsed seconds to the CSV log (breaks byte-equality)"
    )


class SamplingConfig(_Section):
    count: int = Field(default=100, ge=1)
    seed: int = 0
    T: int | None = Field(default=None, ge=1, le=64)
    use_ema: bool = True
    decode: bool = True


# ─────────────────────────── run config ──────────────────────────────────────


class RunConfig(_Section):
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    autoencoder: AutoencoderConfig = Field(default_factory=AutoencoderConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = Field(default_factory=DiscriminatorConfig)
    objectives: ObjectivesConfig = Field(default_factory=ObjectivesConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)

    @model_validator(mode="after")
    def _consistent(self) -> RunConfig:
        if self.generator.mode != self.discriminator.mode:
            raise ValueError("generator and discriminator must share a mode")
        if self.dataset.kind == "gaussians25" and self.generator.mode != "vector":
            raise ValueError("gaussians25 data needs vector-mode networks")
        if self.generator.mode == "grid":
            if self.generator.in_channels != self.discriminator.in_channels:
                raise ValueError("generator/discriminator in_channels differ")
            if self.dataset.is_image and (
                self.generator.in_channels != self.autoencoder.latent_channels
            ):
                raise ValueError("generator.in_channels must equal autoencoder.latent_channels")
        elif self.generator.data_dim != self.discriminator.data_dim:
            raise ValueError("generator/discriminator data_dim differ")
        return self

    def weighted_learning(self) -> WeightedLearningConfig:
        o = self.objectives
        return WeightedLearningConfig(
            delta=o.delta,
            num_epochs=self.training.num_epochs,
            mode=o.mode,
            fixed_lambda=o.fixed_lambda,
        )

    def resolved_seed(self, override: int | None = None) -> int:
        if override is not None:
            return override
        if self.training.seed is not None:
            return self.training.seed
        return int(os.getenv("LDDGAN_SEED", "0"))


# ─────────────────────────── TOML I/O ────────────────────────────────────────


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{source}: invalid TOML: {exc}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError("config", f"{source}: {exc}") from exc


def load_run_config(path: str | Path) -> RunConfig:
    """Read and validate a TOML run config.

    Raises
    ------
    ConfigError
        If the file is missing, is not TOML, or fails validation.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"config file not found: {p}")
    return parse_run_config(p.read_text(encoding="utf-8"), source=str(p))


def with_overrides(cfg: RunConfig, **sections: dict[str, Any]) -> RunConfig:
    """Copy of *cfg* with per-section field overrides, re-validated as a whole.

    ``None`` values are skipped, so unset command-line flags leave the file's
    value in place::

        cfg = with_overrides(cfg, sampling={"seed": 7, "T": None})

    Raises
    ------
    ConfigError
        If a section is unknown or the result fails validation.
    """
    raw = cfg.model_dump()
    for section, values in sections.items():
        if section not in raw:
            raise ConfigError("config", f"unknown section [{section}]")
        raw[section].update({k: v for k, v in values.items() if v is not None})
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError("config", f"invalid override: {exc}") from exc


def dump_run_config(cfg: RunConfig) -> str:
    """Serialize *cfg* as TOML; optional keys left unset are omitted."""
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))
