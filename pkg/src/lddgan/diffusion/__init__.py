"""
Diffusion process: schedule, forward corruption, posterior.
"""
from .schedule import (
    POSTERIOR_VAR_FLOOR,
    NoiseSchedule,
    build_schedule,
    posterior_params,
    posterior_sample,
    q_sample,
    q_step,
)

__all__ = [
    "POSTERIOR_VAR_FLOOR",
    "NoiseSchedule",
    "build_schedule",
    "posterior_params",
    "posterior_sample",
    "q_sample",
    "q_step",
]
