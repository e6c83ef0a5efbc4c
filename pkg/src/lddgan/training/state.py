"""
Model state carried through the GAN training phase.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import torch.nn as nn

from src.lddgan.config import RunConfig
from src.lddgan.core.ema import EmaState
from src.lddgan.core.optim import OptimizerState, module_params, write_params_
from src.lddgan.core.rng import RngStream, seeded
from src.lddgan.gan.discriminator import build_discriminator
from src.lddgan.gan.generator import build_generator


@dataclass
class ModelState:
    """Networks, optimizer moments, EMA shadow, counters and the step stream."""

    generator: nn.Module
    discriminator: nn.Module
    g_opt: OptimizerState
    d_opt: OptimizerState
    ema: EmaState
    stream: RngStream
    epoch: int = 0
    step: int = 0
    d_steps: int = 0


def init_model_state(cfg: RunConfig, seed: int) -> ModelState:
    """Fresh networks and optimizer state, initialized deterministically from *seed*."""
    root = RngStream(seed)
    with seeded(root.derive("generator-init")):
        generator = build_generator(cfg.generator)
    with seeded(root.derive("discriminator-init")):
        discriminator = build_discriminator(cfg.discriminator)
    tc = cfg.training
    betas = (tc.beta1, tc.beta2)
    g_params = module_params(generator)
    return ModelState(
        generator=generator,
        discriminator=discriminator,
        g_opt=OptimizerState.for_params(g_params, tc.lr_g, betas, tc.eps),
        d_opt=OptimizerState.for_params(module_params(discriminator), tc.lr_d, betas, tc.eps),
        ema=EmaState.from_params(g_params, tc.ema_decay),
        stream=root.derive("steps"),
    )


def ema_generator(state: ModelState) -> nn.Module:
    """A copy of the generator carrying the EMA weights."""
    gen = copy.deepcopy(state.generator)
    write_params_(gen, state.ema.shadow)
    gen.eval()
    return gen
