"""
Building blocks shared by the generator and discriminator.

* ``AdaptiveGroupNorm`` — group norm whose scale and shift come from the
  mapped latent ``z``: ``out = GN(h) * (1 + s(z)) + b(z)``.
* ``MappingNetwork``    — PixelNorm followed by an MLP, ``z -> z_embed``.
* ``TimeEmbedding``     — sinusoidal position code of ``t`` and a 2-layer MLP.
* ``ResBlock``          — conditioned residual block (conv or dense).
* ``minibatch_std``     — appends the batch-wide feature std as one channel.
"""
from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.lddgan._errors import ConfigError

GN_EPS = 1e-6
MBSTD_EPS = 1e-8


def group_count(channels: int, max_groups: int = 8) -> int:
    """Groups used for *channels*: ``min(8, channels)``."""
    groups = min(max_groups, channels)
    if channels % groups:
        raise ConfigError(
            "gan", f"{channels} channels are not divisible into {groups} groups"
        )
    return groups


def _per_channel(v: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    """Reshape ``(N, C)`` so it broadcasts over the trailing extents of *like*."""
    return v.view(v.shape[0], v.shape[1], *([1] * (like.dim() - 2)))


# ─────────────────────────── adaptive group norm ─────────────────────────────


def adaptive_group_norm(
    h: torch.Tensor, z_embed: torch.Tensor, head: nn.Linear, groups: int
) -> torch.Tensor:
    """Group-normalize *h* then modulate with ``(s, b) = head(z_embed)``.

    Raises
    ------
    ConfigError
        If the channel count of *h* is not divisible by *groups*.
    """
    channels = h.shape[1]
    if channels % groups:
        raise ConfigError("gan", f"{channels} channels do not split into {groups} groups")
    normalized = F.group_norm(h, groups, eps=GN_EPS)
    scale, shift = head(z_embed).chunk(2, dim=1)
    return normalized * (1.0 + _per_channel(scale, h)) + _per_channel(shift, h)


class AdaptiveGroupNorm(nn.Module):
    def __init__(self, channels: int, z_embed_dim: int, groups: int | None = None) -> None:
        super().__init__()
        self.channels = channels
        self.groups = groups if groups is not None else group_count(channels)
        if channels % self.groups:
            raise ConfigError(
                "gan", f"{channels} channels do not split into {self.groups} groups"
            )
        self.style = nn.Linear(z_embed_dim, 2 * channels)
        nn.init.zeros_(self.style.bias)

    def forward(self, h: torch.Tensor, z_embed: torch.Tensor) -> torch.Tensor:
        return adaptive_group_norm(h, z_embed, self.style, self.groups)


# ─────────────────────────── conditioning ────────────────────────────────────


class PixelNorm(nn.Module):
    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return z * torch.rsqrt(z.pow(2).mean(dim=1, keepdim=True) + 1e-8)


class MappingNetwork(nn.Module):
    """``z (N, z_dim) -> z_embed (N, z_embed_dim)``."""

    def __init__(self, z_dim: int, z_embed_dim: int, num_layers: int) -> None:
        super().__init__()
        layers: list[nn.Module] = [PixelNorm()]
        width = z_dim
        for _ in range(num_layers):
            layers += [nn.Linear(width, z_embed_dim), nn.LeakyReLU(0.2)]
            width = z_embed_dim
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


def sinusoidal_embedding(t: torch.Tensor, dim: int, max_period: float = 10_000.0) -> torch.Tensor:
    """Transformer-style position code of integer timesteps, shape ``(N, dim)``."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1)
    )
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb.to(torch.get_default_dtype())


class TimeEmbedding(nn.Module):
    def __init__(self, dim: int) -> None:
        super().__init__()
        self.dim = dim
        self.net = nn.Sequential(nn.Linear(dim, dim), nn.SiLU(), nn.Linear(dim, dim))

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        emb = sinusoidal_embedding(t, self.dim)
        return self.net(emb.to(self.net[0].weight.dtype))


def as_timesteps(t: int | torch.Tensor, batch: int) -> torch.Tensor:
    """Broadcast an int or 0-dim tensor to a per-item ``(N,)`` long tensor."""
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        return t.long()
    return torch.full((batch,), int(t), dtype=torch.long)


# ─────────────────────────── residual blocks ─────────────────────────────────


class ResBlock(nn.Module):
    """Generator block: ``AdaGN -> SiLU -> conv (+temb) -> AdaGN -> SiLU -> conv``.

    ``spatial=False`` swaps the 3x3 convolutions for dense layers so the
    same block serves vector-mode data ``(N, C)``.
    """

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        temb_dim: int,
        z_embed_dim: int,
        spatial: bool = True,
    ) -> None:
        super().__init__()
        self.norm1 = AdaptiveGroupNorm(in_ch, z_embed_dim)
        self.norm2 = AdaptiveGroupNorm(out_ch, z_embed_dim)
        if spatial:
            self.conv1: nn.Module = nn.Conv2d(in_ch, out_ch, 3, padding=1)
            self.conv2: nn.Module = nn.Conv2d(out_ch, out_ch, 3, padding=1)
            self.skip: nn.Module = (
                nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()
            )
        else:
            self.conv1 = nn.Linear(in_ch, out_ch)
            self.conv2 = nn.Linear(out_ch, out_ch)
            self.skip = nn.Linear(in_ch, out_ch) if in_ch != out_ch else nn.Identity()
        self.temb = nn.Linear(temb_dim, out_ch)

    def forward(self, x: torch.Tensor, temb: torch.Tensor, z_embed: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x, z_embed)))
        h = h + _per_channel(self.temb(F.silu(temb)), h)
        h = self.conv2(F.silu(self.norm2(h, z_embed)))
        return (self.skip(x) + h) / math.sqrt(2.0)


class DiscBlock(nn.Module):
    """Discriminator block with optional 2x average-pool downsampling."""

    def __init__(
        self, in_ch: int, out_ch: int, temb_dim: int, down: bool, spatial: bool = True
    ) -> None:
        super().__init__()
        self.down = down and spatial
        if spatial:
            self.conv1: nn.Module = nn.Conv2d(in_ch, out_ch, 3, padding=1)
            self.conv2: nn.Module = nn.Conv2d(out_ch, out_ch, 3, padding=1)
            self.skip: nn.Module = nn.Conv2d(in_ch, out_ch, 1, bias=False)
        else:
            self.conv1 = nn.Linear(in_ch, out_ch)
            self.conv2 = nn.Linear(out_ch, out_ch)
            self.skip = nn.Linear(in_ch, out_ch, bias=False)
        self.temb = nn.Linear(temb_dim, out_ch)

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.leaky_relu(x, 0.2))
        h = h + _per_channel(self.temb(temb), h)
        h = F.leaky_relu(h, 0.2)
        if self.down:
            h = F.avg_pool2d(h, 2)
        h = self.conv2(h)
        skip = self.skip(x)
        if self.down:
            skip = F.avg_pool2d(skip, 2)
        return (skip + h) / math.sqrt(2.0)


# ─────────────────────────── minibatch std ───────────────────────────────────


def minibatch_std(h: torch.Tensor) -> torch.Tensor:
    """Append one channel holding the mean per-feature std over the whole batch.

    The offset ``sqrt(eps)`` is subtracted so a batch of duplicates yields 0.
    """
    eps = torch.full((), MBSTD_EPS, dtype=h.dtype, device=h.device)
    var = h.var(dim=0, unbiased=False)
    std = ((var + eps).sqrt() - eps.sqrt()).mean()
    extra = std.expand(h.shape[0], 1, *h.shape[2:])
    return torch.cat([h, extra], dim=1)
