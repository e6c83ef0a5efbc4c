"""
z-conditioned generator and time-conditioned pair discriminator.

::

    from src.lddgan.gan import build_generator, build_discriminator
"""
from .discriminator import (
    GridDiscriminator,
    VectorDiscriminator,
    build_discriminator,
    discriminator_forward,
)
from .generator import GridGenerator, VectorGenerator, build_generator, generator_forward
from .layers import AdaptiveGroupNorm, adaptive_group_norm, group_count, minibatch_std

__all__ = [
    "AdaptiveGroupNorm",
    "GridDiscriminator",
    "GridGenerator",
    "VectorDiscriminator",
    "VectorGenerator",
    "adaptive_group_norm",
    "build_discriminator",
    "build_generator",
    "discriminator_forward",
    "generator_forward",
    "group_count",
    "minibatch_std",
]
