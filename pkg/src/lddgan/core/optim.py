"""
Functional Adam with explicit state.

Parameters and gradients travel as ``{name: Tensor}`` dicts so every update
is a pure function of its inputs; ``write_params_`` copies the result back
into an ``nn.Module``.

Defaults follow the GAN regime: beta1 = 0.5, beta2 = 0.9.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import torch
import torch.nn as nn

from src.lddgan._errors import ConfigError, NonFiniteError, ShapeError

ParamDict = dict[str, torch.Tensor]


@dataclass
class OptimizerState:
    """Adam moments and hyper-parameters for one parameter set."""

    lr: float
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8
    step: int = 0
    exp_avg: ParamDict = field(default_factory=dict)
    exp_avg_sq: ParamDict = field(default_factory=dict)

    @classmethod
    def for_params(
        cls,
        params: Mapping[str, torch.Tensor],
        lr: float,
        betas: tuple[float, float] = (0.5, 0.9),
        eps: float = 1e-8,
    ) -> OptimizerState:
        if lr <= 0:
            raise ConfigError("optim", f"learning rate must be positive, got {lr}")
        if not all(0.0 <= b < 1.0 for b in betas):
            raise ConfigError("optim", f"betas must lie in [0, 1), got {betas}")
        return cls(
            lr=lr,
            beta1=betas[0],
            beta2=betas[1],
            eps=eps,
            exp_avg={k: torch.zeros_like(v) for k, v in params.items()},
            exp_avg_sq={k: torch.zeros_like(v) for k, v in params.items()},
        )


def adam_step(
    params: Mapping[str, torch.Tensor],
    grads: Mapping[str, torch.Tensor],
    state: OptimizerState,
) -> tuple[ParamDict, OptimizerState]:
    """One bias-corrected Adam update.

    Returns new parameter tensors and a new state; inputs are not mutated.

    Raises
    ------
    ShapeError
        If names or shapes of params, grads and moments disagree.
    NonFiniteError
        If a gradient holds NaN / Inf; the error names the parameter.
    """
    if set(params) != set(grads) or set(params) != set(state.exp_avg):
        missing = set(params) ^ set(grads) | set(params) ^ set(state.exp_avg)
        raise ShapeError("optim", f"parameter names disagree: {sorted(missing)}")

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**step
    bias2 = 1.0 - b2**step

    new_params: ParamDict = {}
    new_m: ParamDict = {}
    new_v: ParamDict = {}
    for name, p in params.items():
        g = grads[name].detach()
        if g.shape != p.shape or state.exp_avg[name].shape != p.shape:
            raise ShapeError(
                "optim", f"{name}: grad {tuple(g.shape)} vs param {tuple(p.shape)}"
            )
        if not torch.isfinite(g).all():
            raise NonFiniteError("optim", f"non-finite gradient for {name!r}", name=name)
        m = b1 * state.exp_avg[name] + (1.0 - b1) * g
        v = b2 * state.exp_avg_sq[name] + (1.0 - b2) * g * g
        update = (m / bias1) / ((v / bias2).sqrt() + state.eps)
        new_params[name] = p.detach() - state.lr * update
        new_m[name] = m
        new_v[name] = v

    return new_params, replace(state, step=step, exp_avg=new_m, exp_avg_sq=new_v)


def module_params(module: nn.Module) -> ParamDict:
    return dict(module.named_parameters())


def write_params_(module: nn.Module, params: Mapping[str, torch.Tensor]) -> None:
    """Copy *params* into the same-named parameters of *module* in place."""
    with torch.no_grad():
        for name, value in params.items():
            module.get_parameter(name).copy_(value)


def grads_for(loss: torch.Tensor, params: Mapping[str, torch.Tensor]) -> ParamDict:
    """Gradients of *loss* w.r.t. every entry of *params* (zeros when unused)."""
    names = list(params)
    tensors = [params[n] for n in names]
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    return {
        n: torch.zeros_like(t) if g is None else g for n, t, g in zip(names, tensors, grads)
    }
