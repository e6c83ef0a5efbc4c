"""
GAN-phase training: model state, checkpoints, the step and the run loop.

::

    from src.lddgan.training import run_training, load_checkpoint
"""
from .checkpoint import load_checkpoint, save_checkpoint, state_tensors
from .engine import (
    LOG_COLUMNS,
    StepMetrics,
    TrainResult,
    prepare_latents,
    run_training,
    train_gan_step,
)
from .state import ModelState, ema_generator, init_model_state

__all__ = [
    "LOG_COLUMNS",
    "ModelState",
    "StepMetrics",
    "TrainResult",
    "ema_generator",
    "init_model_state",
    "load_checkpoint",
    "prepare_latents",
    "run_training",
    "save_checkpoint",
    "state_tensors",
    "train_gan_step",
]
