"""
Time-conditioned pair discriminator ``D(x_prev, x_t, t) -> logit``.

The pair is concatenated on the channel axis, passed through a residual
downsampling stack, a minibatch-std channel is appended, features are
sum-pooled and a final linear layer emits one logit per item.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.lddgan._errors import ConfigError, ShapeError
from src.lddgan.config import DiscriminatorConfig
from src.lddgan.gan.layers import DiscBlock, TimeEmbedding, as_timesteps, minibatch_std


def _check_pair(x_prev: torch.Tensor, x_t: torch.Tensor) -> None:
    if x_prev.shape != x_t.shape:
        raise ShapeError(
            "discriminator", f"pair shapes differ: {tuple(x_prev.shape)} vs {tuple(x_t.shape)}"
        )


class GridDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig) -> None:
        super().__init__()
        self.cfg = cfg
        chans = cfg.channels
        temb = cfg.time_embed_dim
        self.time = TimeEmbedding(temb)
        self.conv_in = nn.Conv2d(2 * cfg.in_channels, chans[0], 1)
        blocks = [DiscBlock(chans[0], chans[0], temb, down=False)]
        blocks += [DiscBlock(chans[i - 1], chans[i], temb, down=True) for i in range(1, len(chans))]
        self.blocks = nn.ModuleList(blocks)
        self.conv_out = nn.Conv2d(chans[-1] + 1, chans[-1], 3, padding=1)
        self.fc = nn.Linear(chans[-1], 1)

    def forward(
        self, x_prev: torch.Tensor, x_t: torch.Tensor, t: int | torch.Tensor
    ) -> torch.Tensor:
        _check_pair(x_prev, x_t)
        if x_t.dim() != 4 or x_t.shape[1] != self.cfg.in_channels:
            raise ShapeError(
                "discriminator",
                f"expected (N, {self.cfg.in_channels}, H, W), got {tuple(x_t.shape)}",
            )
        factor = 2 ** (len(self.cfg.channels) - 1)
        if x_t.shape[2] % factor or x_t.shape[3] % factor:
            raise ShapeError(
                "discriminator", f"extents {tuple(x_t.shape[2:])} not divisible by {factor}"
            )
        temb = self.time(as_timesteps(t, x_t.shape[0]))
        h = self.conv_in(torch.cat([x_prev, x_t], dim=1))
        for block in self.blocks:
            h = block(h, temb)
        h = F.leaky_relu(self.conv_out(minibatch_std(h)), 0.2)
        return self.fc(h.sum(dim=(2, 3))).squeeze(1)


class VectorDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig) -> None:
        super().__init__()
        self.cfg = cfg
        width, temb = cfg.hidden_dim, cfg.time_embed_dim
        self.time = TimeEmbedding(temb)
        self.inp = nn.Linear(2 * cfg.data_dim, width)
        self.blocks = nn.ModuleList(
            DiscBlock(width, width, temb, down=False, spatial=False) for _ in range(cfg.num_layers)
        )
        self.hidden = nn.Linear(width + 1, width)
        self.fc = nn.Linear(width, 1)

    def forward(
        self, x_prev: torch.Tensor, x_t: torch.Tensor, t: int | torch.Tensor
    ) -> torch.Tensor:
        _check_pair(x_prev, x_t)
        if x_t.dim() != 2 or x_t.shape[1] != self.cfg.data_dim:
            raise ShapeError(
                "discriminator", f"expected (N, {self.cfg.data_dim}), got {tuple(x_t.shape)}"
            )
        temb = self.time(as_timesteps(t, x_t.shape[0]))
        h = self.inp(torch.cat([x_prev, x_t], dim=1))
        for block in self.blocks:
            h = block(h, temb)
        h = F.leaky_relu(self.hidden(minibatch_std(h)), 0.2)
        return self.fc(h).squeeze(1)


Discriminator = GridDiscriminator | VectorDiscriminator


def build_discriminator(cfg: DiscriminatorConfig) -> Discriminator:
    if cfg.mode == "grid":
        return GridDiscriminator(cfg)
    if cfg.mode == "vector":
        return VectorDiscriminator(cfg)
    raise ConfigError("discriminator", f"unknown mode {cfg.mode!r}")


def discriminator_forward(
    x_prev: torch.Tensor, x_t: torch.Tensor, t: int | torch.Tensor, disc: nn.Module
) -> torch.Tensor:
    """One logit per batch item, shape ``(N,)``."""
    return disc(x_prev, x_t, t)
