"""Losses and the Weighted Learning schedule."""
from .losses import (
    WeightedLearningConfig,
    d_loss,
    g_adv_loss,
    g_total_loss,
    lambda_schedule,
    r1_penalty,
    rec_loss,
    resolve_lambda,
)

__all__ = [
    "WeightedLearningConfig",
    "d_loss",
    "g_adv_loss",
    "g_total_loss",
    "lambda_schedule",
    "r1_penalty",
    "rec_loss",
    "resolve_lambda",
]
