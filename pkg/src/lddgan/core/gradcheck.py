"""
Finite-difference gradient checks against torch autograd.

``gradient_check`` compares reverse-mode gradients with central differences
(step 1e-5) and reports the worst norm-wise relative error over all inputs.
Coordinates where forward and backward one-sided slopes disagree are
treated as kinks (e.g. L1 at 0): they are flagged, the input is nudged away
from the kink and the check is re-run once.

Usage
-----
::

    import torch
    from src.lddgan.core.gradcheck import gradient_check

    x = torch.tensor([1.0, 2.0], dtype=torch.float64)
    report = gradient_check(lambda x: (x ** 2).sum(), [x])
    assert report.passed
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import structlog
import torch

from src.lddgan._errors import ConfigError
from src.lddgan.core.rng import RngStream

_LOG = structlog.get_logger(__name__)

_DENOM_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    """Outcome of one gradient check."""

    max_rel_error: float
    tolerance: float
    analytic: list[torch.Tensor]
    numeric: list[torch.Tensor]
    kinks: list[tuple[int, int]] = field(default_factory=list)
    perturbed: bool = False

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _scalar(out: torch.Tensor) -> torch.Tensor:
    return out if out.dim() == 0 else out.sum()


def _analytic(fn: Callable[..., torch.Tensor], xs: list[torch.Tensor]) -> list[torch.Tensor]:
    leaves = [x.detach().clone().requires_grad_(True) for x in xs]
    out = _scalar(fn(*leaves))
    if not out.requires_grad:
        return [torch.zeros_like(x) for x in xs]
    grads = torch.autograd.grad(out, leaves, allow_unused=True)
    return [torch.zeros_like(x) if g is None else g.detach() for x, g in zip(xs, grads)]


def _numeric(
    fn: Callable[..., torch.Tensor],
    xs: list[torch.Tensor],
    coords: list[torch.Tensor],
    step: float,
    kink_threshold: float,
) -> tuple[list[torch.Tensor], list[tuple[int, int]]]:
    numeric = [torch.zeros_like(x) for x in xs]
    kinks: list[tuple[int, int]] = []
    with torch.no_grad():
        f0 = float(_scalar(fn(*xs)))
        for i, x in enumerate(xs):
            flat = x.view(-1)
            for j in coords[i].tolist():
                orig = float(flat[j])
                flat[j] = orig + step
                f_plus = float(_scalar(fn(*xs)))
                flat[j] = orig - step
                f_minus = float(_scalar(fn(*xs)))
                flat[j] = orig
                numeric[i].view(-1)[j] = (f_plus - f_minus) / (2.0 * step)
                fwd = (f_plus - f0) / step
                bwd = (f0 - f_minus) / step
                if abs(fwd - bwd) > kink_threshold * max(1.0, abs(fwd), abs(bwd)):
                    kinks.append((i, j))
    return numeric, kinks


def _max_rel_error(
    analytic: list[torch.Tensor], numeric: list[torch.Tensor], coords: list[torch.Tensor]
) -> float:
    worst = 0.0
    for a, n, c in zip(analytic, numeric, coords):
        if c.numel() == 0:
            continue
        a_sel = a.reshape(-1)[c]
        n_sel = n.reshape(-1)[c]
        diff = float((a_sel - n_sel).abs().max())
        scale = max(float(a_sel.abs().max()), float(n_sel.abs().max()), _DENOM_FLOOR)
        worst = max(worst, diff / scale)
    return worst


def gradient_check(
    function: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    tolerance: float = 1e-4,
    step: float = 1e-5,
    elements: int | None = None,
    kink_threshold: float = 1e-2,
    stream: RngStream | None = None,
) -> GradCheckReport:
    """Compare autograd gradients of *function* with central differences.

    Parameters
    ----------
    function:
        Callable taking the tensors of *inputs* positionally and returning a
        tensor; non-scalar outputs are summed.
    inputs:
        Float64 tensors at which to check.
    tolerance:
        Pass threshold on the max norm-wise relative error.
    step:
        Central-difference step.
    elements:
        When set, check only this many randomly chosen coordinates per input
        (for large parameter sets).
    kink_threshold:
        Relative gap between one-sided slopes above which a coordinate is
        treated as a non-differentiable point.
    stream:
        Stream used for coordinate subsampling and kink perturbation.

    Raises
    ------
    ConfigError
        If any input is not float64.
    """
    xs = [x.detach().clone() for x in inputs]
    for x in xs:
        if x.dtype != torch.float64:
            raise ConfigError("gradcheck", f"inputs must be float64, got {x.dtype}")
    stream = stream or RngStream(seed=0)

    coords: list[torch.Tensor] = []
    for x in xs:
        n = x.numel()
        if elements is None or elements >= n:
            coords.append(torch.arange(n))
        else:
            coords.append(stream.permutation(n)[:elements].sort().values)

    numeric, kinks = _numeric(function, xs, coords, step, kink_threshold)
    perturbed = False
    if kinks:
        _LOG.warning("gradcheck.kink", count=len(kinks), first=kinks[0])
        offsets = stream.uniform((len(kinks),), dtype=torch.float64)
        for (i, j), u in zip(kinks, offsets.tolist()):
            xs[i].view(-1)[j] += 100.0 * step * (1.0 + u)
        numeric, _ = _numeric(function, xs, coords, step, kink_threshold)
        perturbed = True

    analytic = _analytic(function, xs)
    return GradCheckReport(
        max_rel_error=_max_rel_error(analytic, numeric, coords),
        tolerance=tolerance,
        analytic=analytic,
        numeric=numeric,
        kinks=kinks,
        perturbed=perturbed,
    )
