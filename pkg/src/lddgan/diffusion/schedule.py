"""
Few-step variance schedule, forward corruption and Gaussian posterior.

All per-step arrays are float64 of length ``T + 1`` indexed by timestep;
index 0 is the clean-data convention (``alpha_bar[0] = 1``, ``beta[0] = 0``).

Posterior of the forward chain (Gaussian conjugacy)::

    coef_x0[t]       = beta[t] * sqrt(alpha_bar[t-1]) / (1 - alpha_bar[t])
    coef_xt[t]       = (1 - alpha_bar[t-1]) * sqrt(alpha[t]) / (1 - alpha_bar[t])
    posterior_var[t] = beta[t] * (1 - alpha_bar[t-1]) / (1 - alpha_bar[t])

At ``t = 1`` the posterior collapses onto x0; its variance is floored at
``POSTERIOR_VAR_FLOOR`` so the sampling loop stays uniform.

Usage
-----
::

    from src.lddgan.diffusion.schedule import build_schedule, q_sample, posterior_sample

    sched = build_schedule(T=4)
    x_t = q_sample(x0, t, noise, sched)
    x_prev = posterior_sample(x0_pred, x_t, t, noise2, sched)
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Literal

import pandas as pd
import structlog
import torch

from src.lddgan._errors import ConfigError, ScheduleIndexError, ShapeError

_LOG = structlog.get_logger(__name__)

POSTERIOR_VAR_FLOOR = 1e-6
MAX_STEPS = 64
TERMINAL_REJECT = 1e-2
TERMINAL_TARGET = 1e-4

ScheduleKind = Literal["linear", "geometric", "custom"]
Timestep = int | torch.Tensor


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Immutable per-step schedule arrays (length ``T + 1``)."""

    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bar: torch.Tensor
    coef_x0: torch.Tensor
    coef_xt: torch.Tensor
    posterior_var: torch.Tensor
    kind: ScheduleKind = "custom"
    beta_min: float = 0.0
    beta_max: float = 0.0

    @property
    def T(self) -> int:  # noqa: N802
        return self.betas.shape[0] - 1

    @classmethod
    def from_betas(
        cls,
        betas: Sequence[float] | torch.Tensor,
        kind: ScheduleKind = "custom",
    ) -> NoiseSchedule:
        """Derive every array from explicit per-step betas ``beta[1..T]``."""
        b = torch.as_tensor(betas, dtype=torch.float64).flatten()
        if b.numel() < 1 or b.numel() > MAX_STEPS:
            raise ConfigError("schedule", f"need 1..{MAX_STEPS} betas, got {b.numel()}")
        if not bool(((b > 0) & (b < 1)).all()):
            raise ConfigError("schedule", f"betas must lie in (0, 1), got {b.tolist()}")

        betas_full = torch.cat([torch.zeros(1, dtype=torch.float64), b])
        alphas = 1.0 - betas_full
        alpha_bar = torch.cumprod(alphas, dim=0)
        ab_prev = torch.cat([torch.ones(1, dtype=torch.float64), alpha_bar[:-1]])

        denom = (1.0 - alpha_bar).clamp_min(torch.finfo(torch.float64).tiny)
        coef_x0 = betas_full * ab_prev.sqrt() / denom
        coef_xt = (1.0 - ab_prev) * alphas.sqrt() / denom
        post_var = betas_full * (1.0 - ab_prev) / denom
        # t = 0 is never a posterior step; t = 1 collapses onto x0.
        coef_x0[0], coef_xt[0], post_var[0] = 1.0, 0.0, POSTERIOR_VAR_FLOOR
        coef_x0[1], coef_xt[1] = 1.0, 0.0
        post_var = post_var.clamp_min(POSTERIOR_VAR_FLOOR)

        return cls(
            betas=betas_full,
            alphas=alphas,
            alpha_bar=alpha_bar,
            coef_x0=coef_x0,
            coef_xt=coef_xt,
            posterior_var=post_var,
            kind=kind,
            beta_min=float(b.min()),
            beta_max=float(b.max()),
        )

    def with_steps(self, T: int, strict: bool = True) -> NoiseSchedule:  # noqa: N803
        """Rebuild with *T* steps over the same beta range and kind."""
        if T == self.T:
            return self
        kind = "linear" if self.kind == "custom" else self.kind
        return build_schedule(T, self.beta_min, self.beta_max, kind, strict=strict)

    def to_frame(self) -> pd.DataFrame:
        """One row per step ``t = 1..T`` (the ``schedule`` CSV layout)."""
        t = range(1, self.T + 1)
        return pd.DataFrame(
            {
                "t": list(t),
                "beta": self.betas[1:].tolist(),
                "alpha": self.alphas[1:].tolist(),
                "alpha_bar": self.alpha_bar[1:].tolist(),
                "coef_x0": self.coef_x0[1:].tolist(),
                "coef_xt": self.coef_xt[1:].tolist(),
                "posterior_var": self.posterior_var[1:].tolist(),
            }
        )


def build_schedule(
    T: int = 4,  # noqa: N803
    beta_min: float = 0.1,
    beta_max: float = 0.9999,
    kind: Literal["linear", "geometric"] = "linear",
    strict: bool = True,
) -> NoiseSchedule:
    """Build a monotone schedule of *T* betas between *beta_min* and *beta_max*.

    ``T = 1`` uses the single beta *beta_max*.

    Raises
    ------
    ConfigError
        On out-of-range parameters, or (when *strict*) if the terminal
        ``alpha_bar[T]`` is not below 1e-2.
    """
    if not 1 <= T <= MAX_STEPS:
        raise ConfigError("schedule", f"T must lie in [1, {MAX_STEPS}], got {T}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ConfigError(
            "schedule", f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}"
        )
    if kind == "linear":
        betas = torch.linspace(beta_min, beta_max, T, dtype=torch.float64)
    elif kind == "geometric":
        betas = torch.exp(
            torch.linspace(math.log(beta_min), math.log(beta_max), T, dtype=torch.float64)
        )
    else:
        raise ConfigError("schedule", f"unknown schedule kind {kind!r}")
    if T == 1:
        betas = torch.tensor([beta_max], dtype=torch.float64)

    sched = NoiseSchedule.from_betas(betas, kind=kind)
    sched = replace(sched, beta_min=beta_min, beta_max=beta_max)

    terminal = float(sched.alpha_bar[-1])
    if terminal >= TERMINAL_REJECT:
        if strict:
            raise ConfigError(
                "schedule",
                f"alpha_bar[T] = {terminal:.4g} >= {TERMINAL_REJECT}; terminal state is not "
                "close to isotropic noise (raise beta_max or T)",
            )
        _LOG.warning("schedule.terminal_rejected", alpha_bar_T=terminal, T=T)
    elif terminal >= TERMINAL_TARGET:
        _LOG.warning("schedule.terminal_high", alpha_bar_T=terminal, T=T)
    return sched


# ─────────────────────────── indexing helpers ────────────────────────────────


def _check_t(t: Timestep, sched: NoiseSchedule, low: int) -> None:
    if isinstance(t, torch.Tensor):
        if t.numel() == 0:
            return
        lo, hi = int(t.min()), int(t.max())
    else:
        lo = hi = int(t)
    if lo < low or hi > sched.T:
        raise ScheduleIndexError("schedule", f"t must lie in [{low}, {sched.T}], got [{lo}, {hi}]")


def _extract(arr: torch.Tensor, t: Timestep, like: torch.Tensor) -> torch.Tensor:
    """Gather ``arr[t]`` and reshape it to broadcast against *like* (batch-first)."""
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        if t.shape[0] != like.shape[0]:
            raise ShapeError(
                "schedule", f"{t.shape[0]} timesteps for a batch of {like.shape[0]}"
            )
        out = arr[t.long()].to(like.dtype)
        return out.view(-1, *([1] * (like.dim() - 1)))
    return arr[int(t)].to(like.dtype)


def _same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError("schedule", f"{what}: {tuple(a.shape)} vs {tuple(b.shape)}")


# ─────────────────────────── forward process ─────────────────────────────────


def q_sample(
    x0: torch.Tensor, t: Timestep, noise: torch.Tensor, sched: NoiseSchedule
) -> torch.Tensor:
    """Sample the marginal ``q(x_t | x0)``; ``t = 0`` returns *x0* (with zero noise weight)."""
    _check_t(t, sched, low=0)
    _same_shape(x0, noise, "noise vs x0")
    ab = _extract(sched.alpha_bar, t, x0)
    return ab.sqrt() * x0 + (1.0 - ab).sqrt() * noise


def q_step(
    x_prev: torch.Tensor, t: Timestep, noise: torch.Tensor, sched: NoiseSchedule
) -> torch.Tensor:
    """One forward step ``q(x_t | x_{t-1})``."""
    _check_t(t, sched, low=1)
    _same_shape(x_prev, noise, "noise vs x_prev")
    alpha = _extract(sched.alphas, t, x_prev)
    beta = _extract(sched.betas, t, x_prev)
    return alpha.sqrt() * x_prev + beta.sqrt() * noise


# ─────────────────────────── posterior ───────────────────────────────────────


def posterior_params(
    x0: torch.Tensor, x_t: torch.Tensor, t: Timestep, sched: NoiseSchedule
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean and variance of ``q(x_{t-1} | x_t, x0)``.

    The variance is a 0-dim tensor for an integer *t* and a batch-broadcastable
    tensor for a per-item timestep tensor.
    """
    _check_t(t, sched, low=1)
    _same_shape(x0, x_t, "x0 vs x_t")
    mean = _extract(sched.coef_x0, t, x0) * x0 + _extract(sched.coef_xt, t, x0) * x_t
    var = _extract(sched.posterior_var, t, x0)
    return mean, var


def posterior_sample(
    x0: torch.Tensor,
    x_t: torch.Tensor,
    t: Timestep,
    noise: torch.Tensor,
    sched: NoiseSchedule,
) -> torch.Tensor:
    """``mean + sqrt(var) * noise``; differentiable w.r.t. *x0*."""
    _same_shape(x0, noise, "noise vs x0")
    mean, var = posterior_params(x0, x_t, t, sched)
    return mean + var.sqrt() * noise
