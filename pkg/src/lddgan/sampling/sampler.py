"""
Few-step sampling from pure noise.

::

    x_T ~ N(0, I)
    for t = T .. 1:
        z       ~ N(0, I)                        (fresh every step)
        x0_pred = G(x_t, z, t)
        x_{t-1} = posterior_sample(x0_pred, x_t, t)   (t = 1: x0_pred itself)
    X = decode(x_0 / latent_scale)               (image data only)

The stream advances by ``2 T`` draws per call: one for ``x_T``, then ``z``
and posterior noise per step except ``t = 1`` which draws only ``z``.

Usage
-----
::

    from src.lddgan.sampling.sampler import SampleRequest, sample

    samples, stats = sample(SampleRequest(count=100, seed=0), generator, sched, (2,))
    assert stats.nfe == sched.T
"""
from __future__ import annotations

import statistics
import time
from collections.abc import Sequence
from dataclasses import dataclass

import pandas as pd
import structlog
import torch
import torch.nn as nn

from src.lddgan._errors import ConfigError, ShapeError
from src.lddgan.autoencoder.model import Autoencoder, decode
from src.lddgan.config import RunConfig
from src.lddgan.core.rng import RngStream
from src.lddgan.diffusion.schedule import MAX_STEPS, NoiseSchedule, posterior_sample
from src.lddgan.training.state import ModelState, ema_generator

_LOG = structlog.get_logger(__name__)

STATS_HEADER = "nfe,seconds,count"


@dataclass(frozen=True)
class SampleRequest:
    count: int = 100
    seed: int = 0
    t_override: int | None = None
    use_ema: bool = True
    decode: bool = True

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError("sampler", f"count must be >= 1, got {self.count}")
        if self.t_override is not None and not 1 <= self.t_override <= MAX_STEPS:
            raise ConfigError(
                "sampler", f"T override must lie in [1, {MAX_STEPS}], got {self.t_override}"
            )


@dataclass
class SampleStats:
    nfe: int
    wall_seconds: float
    count: int

    def csv_line(self) -> str:
        return f"{self.nfe},{self.wall_seconds:.6f},{self.count}"


def denoise_step(
    x_t: torch.Tensor,
    t: int,
    z: torch.Tensor,
    generator: nn.Module,
    sched: NoiseSchedule,
    stream: RngStream,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One reverse step; returns ``(x0_pred, x_prev)``.

    At ``t = 1`` the posterior is degenerate: ``x_prev`` is ``x0_pred`` and
    no noise is drawn.
    """
    x0_pred = generator(x_t, z, t)
    if x0_pred.shape != x_t.shape:
        raise ShapeError(
            "sampler", f"generator output {tuple(x0_pred.shape)} vs input {tuple(x_t.shape)}"
        )
    if t == 1:
        return x0_pred, x0_pred
    noise = stream.gaussian(x_t.shape, dtype=x_t.dtype)
    return x0_pred, posterior_sample(x0_pred, x_t, t, noise, sched)


def sampling_generator(state: ModelState, use_ema: bool = True) -> nn.Module:
    gen = ema_generator(state) if use_ema else state.generator
    gen.eval()
    return gen


def latent_shape_for(cfg: RunConfig) -> tuple[int, ...]:
    """Per-item shape the generator works in."""
    g = cfg.generator
    if g.mode == "vector":
        return (g.data_dim,)
    side = cfg.dataset.image_size // cfg.autoencoder.f
    return (g.in_channels, side, side)


def sample(
    req: SampleRequest,
    generator: nn.Module | ModelState,
    sched: NoiseSchedule,
    latent_shape: Sequence[int],
    ae: Autoencoder | None = None,
    stream: RngStream | None = None,
) -> tuple[torch.Tensor, SampleStats]:
    """Generate ``req.count`` samples in ``sched.T`` (or ``req.t_override``) steps.

    Given a :class:`ModelState`, ``req.use_ema`` picks the EMA or the raw
    generator weights; a bare module is used as is.

    Timing covers the denoising loop and, when ``req.decode`` and an
    autoencoder is given, the decode; it excludes model loading.
    """
    if req.t_override is not None:
        sched = sched.with_steps(req.t_override, strict=False)
    if isinstance(generator, ModelState):
        generator = sampling_generator(generator, req.use_ema)
    stream = stream if stream is not None else RngStream(req.seed)
    z_dim = generator.cfg.z_dim
    dtype = next(generator.parameters()).dtype

    started = time.perf_counter()
    nfe = 0
    with torch.no_grad():
        x = stream.gaussian((req.count, *latent_shape), dtype=dtype)
        for t in range(sched.T, 0, -1):
            z = stream.gaussian((req.count, z_dim), dtype=dtype)
            _, x = denoise_step(x, t, z, generator, sched, stream)
            nfe += 1
        if req.decode and ae is not None:
            x = decode(x / ae.latent_scale, ae)
    stats = SampleStats(nfe=nfe, wall_seconds=time.perf_counter() - started, count=req.count)
    _LOG.debug("sample.done", nfe=stats.nfe, seconds=stats.wall_seconds, count=req.count)
    return x, stats


def benchmark_sampling(
    generator: nn.Module,
    sched: NoiseSchedule,
    latent_shape: Sequence[int],
    steps: Sequence[int] = (1, 2, 4, 8),
    batch: int = 100,
    trials: int = 10,
    ae: Autoencoder | None = None,
    seed: int = 0,
) -> pd.DataFrame:
    """Median / mean seconds to generate one batch, per step count."""
    rows = []
    for T in steps:  # noqa: N806
        times = []
        for trial in range(trials):
            req = SampleRequest(count=batch, seed=seed + trial, t_override=T, decode=ae is not None)
            _, stats = sample(req, generator, sched, latent_shape, ae)
            times.append(stats.wall_seconds)
        rows.append(
            {
                "T": T,
                "nfe": stats.nfe,
                "median_seconds": statistics.median(times),
                "mean_seconds": statistics.fmean(times),
            }
        )
    return pd.DataFrame(rows)
