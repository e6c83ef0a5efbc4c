"""
Core math substrate: seeded streams, gradient checks, Adam, EMA.

::

    from src.lddgan.core import RngStream, gaussian_sample, adam_step, ema_update
"""
from .ema import EmaState, ema_update
from .gradcheck import GradCheckReport, gradient_check
from .optim import OptimizerState, adam_step, grads_for, module_params, write_params_
from .rng import RngStream, gaussian_sample, seeded

__all__ = [
    "EmaState",
    "GradCheckReport",
    "OptimizerState",
    "RngStream",
    "adam_step",
    "ema_update",
    "gaussian_sample",
    "gradient_check",
    "grads_for",
    "module_params",
    "seeded",
    "write_params_",
]
