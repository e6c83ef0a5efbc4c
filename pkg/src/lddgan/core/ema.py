"""
Exponential moving average of parameters.

    shadow <- decay * shadow + (1 - decay) * params

computed as ``shadow + (1 - decay) * (params - shadow)`` so that a shadow
equal to the parameters is a bitwise fixed point.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import torch

from src.lddgan._errors import ConfigError, ShapeError


@dataclass(frozen=True)
class EmaState:
    """Shadow copy of a parameter set with a constant decay."""

    shadow: dict[str, torch.Tensor]
    decay: float

    def __post_init__(self) -> None:
        if not 0.0 < self.decay < 1.0:
            raise ConfigError("ema", f"decay must lie in (0, 1), got {self.decay}")

    @classmethod
    def from_params(cls, params: Mapping[str, torch.Tensor], decay: float) -> EmaState:
        return cls(shadow={k: v.detach().clone() for k, v in params.items()}, decay=decay)

    @classmethod
    def zeros_like(cls, params: Mapping[str, torch.Tensor], decay: float) -> EmaState:
        return cls(shadow={k: torch.zeros_like(v) for k, v in params.items()}, decay=decay)


def ema_update(ema: EmaState, params: Mapping[str, torch.Tensor]) -> EmaState:
    """Return the EMA state after absorbing *params*.

    Raises
    ------
    ShapeError
        If a parameter is missing or its shape differs from the shadow.
    """
    keep = 1.0 - ema.decay
    shadow: dict[str, torch.Tensor] = {}
    for name, s in ema.shadow.items():
        if name not in params:
            raise ShapeError("ema", f"missing parameter {name!r}")
        p = params[name].detach()
        if p.shape != s.shape:
            raise ShapeError("ema", f"{name}: param {tuple(p.shape)} vs shadow {tuple(s.shape)}")
        shadow[name] = s + keep * (p - s)
    return EmaState(shadow=shadow, decay=ema.decay)
