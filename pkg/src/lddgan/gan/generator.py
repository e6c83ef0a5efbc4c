"""
Conditional generator ``G(x_t, z, t) -> x0_pred``.

Two variants share one contract (output shape == input shape):

* ``GridGenerator``   — U-shaped conv net over the latent grid with skips.
* ``VectorGenerator`` — dense residual net for 2-D point data.

``z`` passes through the mapping network into every adaptive group norm;
``t`` enters through a sinusoidal time embedding added inside each block.
"""
from __future__ import annotations

import structlog
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.lddgan._errors import ConfigError, ShapeError
from src.lddgan.config import GeneratorConfig
from src.lddgan.gan.layers import (
    AdaptiveGroupNorm,
    MappingNetwork,
    ResBlock,
    TimeEmbedding,
    as_timesteps,
)

_LOG = structlog.get_logger(__name__)


def _check_z(z: torch.Tensor, x_t: torch.Tensor, z_dim: int) -> None:
    if z.dim() != 2 or z.shape != (x_t.shape[0], z_dim):
        raise ShapeError(
            "generator", f"z must be ({x_t.shape[0]}, {z_dim}), got {tuple(z.shape)}"
        )


class GridGenerator(nn.Module):
    """U-Net generator for latents ``(N, C, H, W)``."""

    def __init__(self, cfg: GeneratorConfig) -> None:
        super().__init__()
        self.cfg = cfg
        if cfg.attention_resolutions:
            _LOG.warning(
                "generator.attention_ignored", resolutions=cfg.attention_resolutions
            )
        chans = [cfg.base_channels * m for m in cfg.channel_multipliers]
        temb, zemb = cfg.time_embed_dim, cfg.z_embed_dim
        self.levels = len(chans)

        self.mapping = MappingNetwork(cfg.z_dim, zemb, cfg.z_mapping_layers)
        self.time = TimeEmbedding(temb)
        self.conv_in = nn.Conv2d(cfg.in_channels, chans[0], 3, padding=1)

        self.down = nn.ModuleList()
        self.downsample = nn.ModuleList()
        prev = chans[0]
        for i, ch in enumerate(chans):
            blocks = nn.ModuleList()
            for _ in range(cfg.num_res_blocks):
                blocks.append(ResBlock(prev, ch, temb, zemb))
                prev = ch
            self.down.append(blocks)
            self.downsample.append(
                nn.Conv2d(ch, ch, 3, stride=2, padding=1) if i < self.levels - 1 else nn.Identity()
            )

        self.mid = nn.ModuleList([ResBlock(prev, prev, temb, zemb) for _ in range(2)])

        self.up = nn.ModuleList()
        self.upsample = nn.ModuleList()
        for i in reversed(range(self.levels)):
            ch = chans[i]
            blocks = nn.ModuleList([ResBlock(prev + ch, ch, temb, zemb)])
            blocks.extend(ResBlock(ch, ch, temb, zemb) for _ in range(cfg.num_res_blocks - 1))
            prev = ch
            self.up.append(blocks)
            self.upsample.append(nn.Conv2d(ch, ch, 3, padding=1) if i > 0 else nn.Identity())

        self.norm_out = AdaptiveGroupNorm(prev, zemb)
        self.conv_out = nn.Conv2d(prev, cfg.in_channels, 3, padding=1)

    def forward(self, x_t: torch.Tensor, z: torch.Tensor, t: int | torch.Tensor) -> torch.Tensor:
        if x_t.dim() != 4 or x_t.shape[1] != self.cfg.in_channels:
            raise ShapeError(
                "generator",
                f"expected (N, {self.cfg.in_channels}, H, W), got {tuple(x_t.shape)}",
            )
        factor = 2 ** (self.levels - 1)
        if x_t.shape[2] % factor or x_t.shape[3] % factor:
            raise ShapeError(
                "generator", f"latent extents {tuple(x_t.shape[2:])} not divisible by {factor}"
            )
        _check_z(z, x_t, self.cfg.z_dim)

        z_embed = self.mapping(z)
        temb = self.time(as_timesteps(t, x_t.shape[0]))

        h = self.conv_in(x_t)
        skips: list[torch.Tensor] = []
        for blocks, down in zip(self.down, self.downsample):
            for block in blocks:
                h = block(h, temb, z_embed)
            skips.append(h)
            h = down(h)
        for block in self.mid:
            h = block(h, temb, z_embed)
        for blocks, up in zip(self.up, self.upsample):
            h = torch.cat([h, skips.pop()], dim=1)
            for block in blocks:
                h = block(h, temb, z_embed)
            if not isinstance(up, nn.Identity):
                h = up(F.interpolate(h, scale_factor=2.0, mode="nearest"))
        return self.conv_out(F.silu(self.norm_out(h, z_embed)))


class VectorGenerator(nn.Module):
    """Dense generator for point data ``(N, D)``."""

    def __init__(self, cfg: GeneratorConfig) -> None:
        super().__init__()
        self.cfg = cfg
        width, temb, zemb = cfg.hidden_dim, cfg.time_embed_dim, cfg.z_embed_dim
        self.mapping = MappingNetwork(cfg.z_dim, zemb, cfg.z_mapping_layers)
        self.time = TimeEmbedding(temb)
        self.inp = nn.Linear(cfg.data_dim, width)
        self.blocks = nn.ModuleList(
            ResBlock(width, width, temb, zemb, spatial=False) for _ in range(cfg.num_layers)
        )
        self.norm_out = AdaptiveGroupNorm(width, zemb)
        self.out = nn.Linear(width, cfg.data_dim)

    def forward(self, x_t: torch.Tensor, z: torch.Tensor, t: int | torch.Tensor) -> torch.Tensor:
        if x_t.dim() != 2 or x_t.shape[1] != self.cfg.data_dim:
            raise ShapeError(
                "generator", f"expected (N, {self.cfg.data_dim}), got {tuple(x_t.shape)}"
            )
        _check_z(z, x_t, self.cfg.z_dim)
        z_embed = self.mapping(z)
        temb = self.time(as_timesteps(t, x_t.shape[0]))
        h = self.inp(x_t)
        for block in self.blocks:
            h = block(h, temb, z_embed)
        return self.out(F.silu(self.norm_out(h, z_embed)))


Generator = GridGenerator | VectorGenerator


def build_generator(cfg: GeneratorConfig) -> Generator:
    if cfg.mode == "grid":
        return GridGenerator(cfg)
    if cfg.mode == "vector":
        return VectorGenerator(cfg)
    raise ConfigError("generator", f"unknown mode {cfg.mode!r}")


def generator_forward(
    x_t: torch.Tensor, z: torch.Tensor, t: int | torch.Tensor, generator: nn.Module
) -> torch.Tensor:
    """``x0_pred = G(x_t, z, t)``; output shape equals ``x_t.shape``."""
    return generator(x_t, z, t)
