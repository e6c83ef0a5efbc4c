"""
Shared pytest fixtures.

All tests run OFFLINE on the CPU.  Network sizes below are the smallest
that satisfy the group-norm divisibility rules (multiples of 8), so the
default suite finishes in well under a minute; end-to-end training runs
are marked ``slow`` and excluded unless ``-m slow`` is given.
"""

from pathlib import Path

import pytest
import structlog
import torch
from dotenv import load_dotenv

from src.lddgan.config import (
    AutoencoderConfig,
    DatasetSpec,
    DiscriminatorConfig,
    GeneratorConfig,
    ObjectivesConfig,
    RunConfig,
    ScheduleConfig,
    TrainConfig,
)

_root = Path(__file__).parent.parent
load_dotenv(_root / ".env")


@pytest.fixture(autouse=True)
def _reset_structlog():
    """Undo CLI logging config so it cannot pin a closed capture stream."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def float64():
    """Run the test with float64 as torch's default dtype."""
    prev = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield torch.float64
    torch.set_default_dtype(prev)


def tiny_vector_config(output_dir: Path, **training) -> RunConfig:
    """Vector-mode G/D on 25-Gaussians points with minimal widths."""
    train = {"batch_size": 16, "num_epochs": 2, "ema_decay": 0.9, "seed": 1}
    train.update(training)
    return RunConfig(
        dataset=DatasetSpec(kind="gaussians25", count=64, seed=0),
        schedule=ScheduleConfig(T=4),
        generator=GeneratorConfig(
            mode="vector",
            data_dim=2,
            z_dim=4,
            z_mapping_layers=1,
            z_embed_dim=16,
            time_embed_dim=8,
            hidden_dim=16,
            num_layers=1,
        ),
        discriminator=DiscriminatorConfig(
            mode="vector", data_dim=2, time_embed_dim=8, hidden_dim=16, num_layers=1
        ),
        objectives=ObjectivesConfig(lazy_interval=2),
        training=TrainConfig(output_dir=str(output_dir), **train),
    )


def tiny_grid_config(output_dir: Path, **training) -> RunConfig:
    """Grid-mode G/D over 4x4x4 latents of 8x8 toy images (f = 2)."""
    train = {"batch_size": 4, "num_epochs": 1, "ema_decay": 0.9, "seed": 1}
    train.update(training)
    return RunConfig(
        dataset=DatasetSpec(kind="toy_images", count=8, seed=0, image_size=8),
        schedule=ScheduleConfig(T=2),
        autoencoder=AutoencoderConfig(
            f=2, latent_channels=4, base_channels=8, batch_size=4, num_epochs=2, lr=1e-3
        ),
        generator=GeneratorConfig(
            mode="grid",
            in_channels=4,
            base_channels=8,
            channel_multipliers=[1, 2],
            num_res_blocks=1,
            z_dim=4,
            z_mapping_layers=1,
            z_embed_dim=16,
            time_embed_dim=8,
        ),
        discriminator=DiscriminatorConfig(
            mode="grid", in_channels=4, channels=[8, 16], time_embed_dim=8
        ),
        training=TrainConfig(output_dir=str(output_dir), **train),
    )


@pytest.fixture
def vector_cfg(tmp_path: Path) -> RunConfig:
    return tiny_vector_config(tmp_path / "run")


@pytest.fixture
def grid_cfg(tmp_path: Path) -> RunConfig:
    return tiny_grid_config(tmp_path / "run")
