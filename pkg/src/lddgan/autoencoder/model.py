"""
Convolutional autoencoder mapping images ``(N, C, H, W)`` to latents
``(N, latent_channels, H/f, W/f)``.

The encoder is a strided conv stack with residual blocks (width
``base_channels * 2**level``, ``log2(f)`` downsamples); the decoder mirrors
it with nearest-neighbour upsampling and a ``tanh`` output so pixels stay
in ``[-1, 1]``.  With ``use_kl_penalty`` the encoder emits ``(mu, logvar)``
and training samples ``mu + exp(logvar / 2) * eps``; inference always uses
``mu``.

``latent_scale`` is a buffer set after training so that
``encode(x) * latent_scale`` has unit per-element std.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.lddgan._errors import ConfigError, ShapeError
from src.lddgan.config import AutoencoderConfig
from src.lddgan.core.rng import RngStream
from src.lddgan.gan.layers import group_count


class AEResBlock(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        groups = group_count(channels)
        self.body = nn.Sequential(
            nn.GroupNorm(groups, channels),
            nn.SiLU(),
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.GroupNorm(groups, channels),
            nn.SiLU(),
            nn.Conv2d(channels, channels, 3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class Encoder(nn.Module):
    def __init__(self, cfg: AutoencoderConfig) -> None:
        super().__init__()
        levels = int(math.log2(cfg.f))
        chans = [cfg.base_channels * 2**i for i in range(levels + 1)]
        out = 2 * cfg.latent_channels if cfg.use_kl_penalty else cfg.latent_channels
        layers: list[nn.Module] = [nn.Conv2d(cfg.image_channels, chans[0], 3, padding=1)]
        for i in range(levels):
            layers += [
                AEResBlock(chans[i]),
                nn.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1),
            ]
        layers += [
            AEResBlock(chans[-1]),
            nn.GroupNorm(group_count(chans[-1]), chans[-1]),
            nn.SiLU(),
            nn.Conv2d(chans[-1], out, 3, padding=1),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Decoder(nn.Module):
    def __init__(self, cfg: AutoencoderConfig) -> None:
        super().__init__()
        levels = int(math.log2(cfg.f))
        chans = [cfg.base_channels * 2**i for i in range(levels + 1)]
        layers: list[nn.Module] = [
            nn.Conv2d(cfg.latent_channels, chans[-1], 3, padding=1),
            AEResBlock(chans[-1]),
        ]
        for i in reversed(range(levels)):
            layers += [
                nn.Upsample(scale_factor=2.0, mode="nearest"),
                nn.Conv2d(chans[i + 1], chans[i], 3, padding=1),
                AEResBlock(chans[i]),
            ]
        layers += [
            nn.GroupNorm(group_count(chans[0]), chans[0]),
            nn.SiLU(),
            nn.Conv2d(chans[0], cfg.image_channels, 3, padding=1),
            nn.Tanh(),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


class PatchDiscriminator(nn.Module):
    """Per-patch realism logits, shape ``(N, 1, H/4, W/4)``."""

    def __init__(self, image_channels: int, base_channels: int) -> None:
        super().__init__()
        wide = 2 * base_channels
        self.net = nn.Sequential(
            nn.Conv2d(image_channels, base_channels, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(base_channels, wide, 4, stride=2, padding=1),
            nn.GroupNorm(group_count(wide), wide),
            nn.LeakyReLU(0.2),
            nn.Conv2d(wide, 1, 3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Autoencoder(nn.Module):
    def __init__(self, cfg: AutoencoderConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)
        self.patch: PatchDiscriminator | None = (
            PatchDiscriminator(cfg.image_channels, cfg.base_channels)
            if cfg.use_patch_adversarial
            else None
        )
        self.register_buffer("latent_scale", torch.ones(()))

    def ae_params(self) -> dict[str, torch.Tensor]:
        """Encoder and decoder parameters (excludes the patch discriminator)."""
        return {
            n: p for n, p in self.named_parameters() if n.startswith(("encoder.", "decoder."))
        }

    def patch_params(self) -> dict[str, torch.Tensor]:
        return {n: p for n, p in self.named_parameters() if n.startswith("patch.")}

    def latent_shape(self, height: int, width: int) -> tuple[int, int, int]:
        f = self.cfg.f
        return self.cfg.latent_channels, height // f, width // f


@dataclass
class EncoderOutput:
    latent: torch.Tensor
    mu: torch.Tensor
    logvar: torch.Tensor | None = None


def _check_images(images: torch.Tensor, ae: Autoencoder) -> None:
    cfg = ae.cfg
    if images.dim() != 4 or images.shape[1] != cfg.image_channels:
        raise ShapeError(
            "autoencoder",
            f"expected (N, {cfg.image_channels}, H, W), got {tuple(images.shape)}",
        )
    h, w = images.shape[2:]
    if h % cfg.f or w % cfg.f:
        raise ConfigError("autoencoder", f"image size {h}x{w} not divisible by f={cfg.f}")


def encode_with_moments(
    images: torch.Tensor, ae: Autoencoder, stream: RngStream | None = None
) -> EncoderOutput:
    """Encode for training.

    With the KL penalty on and a *stream* given, the latent is the
    reparameterized sample; otherwise it is the (deterministic) mean.
    """
    _check_images(images, ae)
    h = ae.encoder(images)
    if not ae.cfg.use_kl_penalty:
        return EncoderOutput(latent=h, mu=h)
    mu, logvar = h.chunk(2, dim=1)
    logvar = logvar.clamp(-30.0, 20.0)
    if stream is None:
        return EncoderOutput(latent=mu, mu=mu, logvar=logvar)
    eps = stream.gaussian(mu.shape, dtype=mu.dtype)
    return EncoderOutput(latent=mu + torch.exp(0.5 * logvar) * eps, mu=mu, logvar=logvar)


def encode(images: torch.Tensor, ae: Autoencoder) -> torch.Tensor:
    """Deterministic latent ``(N, latent_channels, H/f, W/f)`` (unscaled).

    Raises
    ------
    ConfigError
        If H or W is not divisible by ``f``.
    """
    return encode_with_moments(images, ae).mu


def decode(latent: torch.Tensor, ae: Autoencoder, image_size: int | None = None) -> torch.Tensor:
    """Pixels in ``[-1, 1]`` from an unscaled latent.

    With *image_size* given the latent must be ``image_size // f`` on each side.
    """
    c = ae.cfg.latent_channels
    if latent.dim() != 4 or latent.shape[1] != c:
        raise ShapeError(
            "autoencoder", f"expected latent (N, {c}, h, w), got {tuple(latent.shape)}"
        )
    if image_size is not None:
        side = image_size // ae.cfg.f
        if tuple(latent.shape[2:]) != (side, side):
            raise ShapeError(
                "autoencoder",
                f"latent {tuple(latent.shape[2:])} does not decode to {image_size}x{image_size}"
                f" at f={ae.cfg.f}; expected ({side}, {side})",
            )
    return ae.decoder(latent)


def kl_penalty(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Mean of ``0.5 * (mu^2 + exp(logvar) - 1 - logvar)`` over all elements."""
    if mu.shape != logvar.shape:
        raise ShapeError(
            "autoencoder", f"kl_penalty: {tuple(mu.shape)} vs {tuple(logvar.shape)}"
        )
    return 0.5 * (mu * mu + torch.exp(logvar) - 1.0 - logvar).mean()


def reconstruction_l1(images: torch.Tensor, recon: torch.Tensor) -> torch.Tensor:
    return F.l1_loss(recon, images)
