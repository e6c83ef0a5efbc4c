"""
Adversarial, reconstruction and R1 losses plus the Weighted Learning combiner.

Discriminator / generator (non-saturating softplus pair)::

    d_loss     = mean softplus(-D(real)) + softplus(D(fake))
    g_adv_loss = mean softplus(-D(fake))          # = -log sigmoid(D(fake))

Weighted Learning blends reconstruction into the generator objective with
an epoch-dependent weight::

    phi    = -delta + delta * epoch / num_epochs        (weighted)
    phi    = -delta + 2 * delta * epoch / num_epochs    (weighted_v2)
    lambda = 1 - 1 / (1 + exp(-phi))
    g_total = adv + lambda * rec

Usage
-----
::

    from src.lddgan.objectives.losses import WeightedLearningConfig, lambda_schedule

    wl = WeightedLearningConfig(delta=10.0, num_epochs=100)
    lam = lambda_schedule(50, wl)      # ~0.99331
"""
from __future__ import annotations

import math
from collections.abc import Callable
from typing import Literal

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field

from src.lddgan._errors import ConfigError, ShapeError

LossMode = Literal["weighted", "weighted_v2", "linear_fixed", "adversarial_only"]


class WeightedLearningConfig(BaseModel):
    """Weighting of the reconstruction term across training epochs."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    delta: float = Field(default=10.0, gt=0.0)
    num_epochs: int = Field(default=100, ge=1)
    mode: LossMode = "weighted"
    fixed_lambda: float = Field(default=1.0, ge=0.0, description="Used by linear_fixed")


# ─────────────────────────── adversarial ─────────────────────────────────────


def d_loss(
    real_logit: torch.Tensor, fake_logit: torch.Tensor, literal: bool = False
) -> torch.Tensor:
    """Discriminator loss over a batch of logits.

    With *literal* the log-ratio form ``-log D(real) + log D(fake)`` is used
    instead; it is unbounded below and kept only for comparison runs.
    """
    if literal:
        return (F.softplus(-real_logit) - F.softplus(-fake_logit)).mean()
    return (F.softplus(-real_logit) + F.softplus(fake_logit)).mean()


def g_adv_loss(fake_logit: torch.Tensor) -> torch.Tensor:
    return F.softplus(-fake_logit).mean()


def rec_loss(
    x0: torch.Tensor, x0_pred: torch.Tensor, norm: Literal["l1", "l2"] = "l1"
) -> torch.Tensor:
    """Mean absolute (or squared) error between clean and predicted samples."""
    if x0.shape != x0_pred.shape:
        raise ShapeError(
            "objectives", f"rec_loss: {tuple(x0.shape)} vs {tuple(x0_pred.shape)}"
        )
    diff = x0 - x0_pred
    if norm == "l1":
        return diff.abs().mean()
    if norm == "l2":
        return (diff * diff).mean()
    raise ConfigError("objectives", f"unknown reconstruction norm {norm!r}")


# ─────────────────────────── Weighted Learning ───────────────────────────────


def lambda_schedule(epoch: int | float, cfg: WeightedLearningConfig) -> float:
    """Reconstruction weight at *epoch* (``0 <= epoch <= num_epochs``).

    ``lambda(0) = sigmoid(delta)`` and, for mode ``weighted``,
    ``lambda(num_epochs) = 0.5`` exactly.

    Raises
    ------
    ConfigError
        If *epoch* lies outside ``[0, num_epochs]``.
    """
    if not 0 <= epoch <= cfg.num_epochs:
        raise ConfigError(
            "objectives", f"epoch must lie in [0, {cfg.num_epochs}], got {epoch}"
        )
    slope = 2.0 * cfg.delta if cfg.mode == "weighted_v2" else cfg.delta
    phi = -cfg.delta + slope * epoch / cfg.num_epochs
    return 1 - 1 / (1 + math.exp(-phi))


def resolve_lambda(epoch: int, cfg: WeightedLearningConfig) -> float:
    """The lambda the training loop uses at *epoch* for the configured mode."""
    if cfg.mode == "adversarial_only":
        return 0.0
    if cfg.mode == "linear_fixed":
        return cfg.fixed_lambda
    return lambda_schedule(min(epoch, cfg.num_epochs), cfg)


def g_total_loss(
    adv: torch.Tensor, rec: torch.Tensor, lam: float, mode: LossMode = "weighted"
) -> torch.Tensor:
    """``adv + lam * rec``; ``adversarial_only`` returns *adv* itself."""
    if mode == "adversarial_only":
        return adv
    return adv + lam * rec


# ─────────────────────────── R1 ──────────────────────────────────────────────


def r1_penalty(
    disc: Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor],
    x_prev: torch.Tensor,
    x_t: torch.Tensor,
    t: torch.Tensor,
    gamma: float,
) -> torch.Tensor:
    """``gamma / 2 * E[ ||grad_{x_prev, x_t} D||^2 ]`` on real pairs.

    The result stays attached to the graph so it can be differentiated
    with respect to the discriminator parameters.
    """
    if gamma < 0:
        raise ConfigError("objectives", f"R1 gamma must be >= 0, got {gamma}")
    if gamma == 0:
        return x_prev.new_zeros(())

    xp = x_prev.detach().requires_grad_(True)
    xt = x_t.detach().requires_grad_(True)
    logits = disc(xp, xt, t)
    if not logits.requires_grad:
        return x_prev.new_zeros(())
    g_prev, g_t = torch.autograd.grad(
        logits.sum(), [xp, xt], create_graph=True, allow_unused=True
    )
    sq = x_prev.new_zeros(x_prev.shape[0])
    for g in (g_prev, g_t):
        if g is not None:
            sq = sq + g.pow(2).reshape(g.shape[0], -1).sum(dim=1)
    return 0.5 * gamma * sq.mean()
