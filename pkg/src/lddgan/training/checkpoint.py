"""
GAN-phase checkpoints in the LDDG bundle format.

Tensor names::

    generator.<param>            discriminator.<param>
    ema.<param>
    g_opt.exp_avg.<param>        g_opt.exp_avg_sq.<param>
    d_opt.exp_avg.<param>        d_opt.exp_avg_sq.<param>
    meta.<counter>               float64 scalars (seed split into two u32 halves)

All counters fit exactly in float64, so ``load(save(s))`` reproduces every
tensor bitwise and every counter exactly.
"""
from __future__ import annotations

from pathlib import Path

import torch

from src.lddgan._errors import FormatError, ShapeError
from src.lddgan.config import RunConfig
from src.lddgan.core.ema import EmaState
from src.lddgan.core.optim import OptimizerState
from src.lddgan.core.rng import RngStream
from src.lddgan.data.tensor_io import module_tensors, read_bundle, restore_module_, write_bundle
from src.lddgan.training.state import ModelState, init_model_state

_META = ("epoch", "step", "d_steps", "g_opt_step", "d_opt_step", "seed_hi", "seed_lo", "counter")


def _scalar(v: int) -> torch.Tensor:
    return torch.tensor(float(v), dtype=torch.float64)


def _opt_tensors(prefix: str, opt: OptimizerState) -> dict[str, torch.Tensor]:
    out = {f"{prefix}.exp_avg.{k}": v for k, v in opt.exp_avg.items()}
    out.update({f"{prefix}.exp_avg_sq.{k}": v for k, v in opt.exp_avg_sq.items()})
    return out


def state_tensors(state: ModelState) -> dict[str, torch.Tensor]:
    tensors = module_tensors(state.generator, "generator")
    tensors.update(module_tensors(state.discriminator, "discriminator"))
    tensors.update({f"ema.{k}": v for k, v in state.ema.shadow.items()})
    tensors.update(_opt_tensors("g_opt", state.g_opt))
    tensors.update(_opt_tensors("d_opt", state.d_opt))
    meta = {
        "epoch": state.epoch,
        "step": state.step,
        "d_steps": state.d_steps,
        "g_opt_step": state.g_opt.step,
        "d_opt_step": state.d_opt.step,
        "seed_hi": state.stream.seed >> 32,
        "seed_lo": state.stream.seed & 0xFFFFFFFF,
        "counter": state.stream.counter,
    }
    tensors.update({f"meta.{k}": _scalar(v) for k, v in meta.items()})
    return tensors


def save_checkpoint(state: ModelState, path: str | Path) -> Path:
    return write_bundle(path, state_tensors(state))


def _restore_named(
    target: dict[str, torch.Tensor], tensors: dict[str, torch.Tensor], prefix: str
) -> dict[str, torch.Tensor]:
    out: dict[str, torch.Tensor] = {}
    for name, ref in target.items():
        key = f"{prefix}.{name}"
        if key not in tensors:
            raise ShapeError("checkpoint", f"missing tensor {key!r}")
        if tensors[key].shape != ref.shape:
            raise ShapeError(
                "checkpoint",
                f"tensor {key!r}: stored {tuple(tensors[key].shape)} vs model {tuple(ref.shape)}",
            )
        out[name] = tensors[key].to(ref.dtype)
    return out


def load_checkpoint(path: str | Path, cfg: RunConfig) -> ModelState:
    """Rebuild the networks from *cfg* and restore every tensor and counter.

    Raises
    ------
    FormatError
        On bad magic, version, truncation or missing counters.
    ShapeError
        If the file was written for a different architecture; the message
        names the offending tensor.
    """
    tensors = read_bundle(path)
    for k in _META:
        if f"meta.{k}" not in tensors:
            raise FormatError("checkpoint", f"{path}: missing counter meta.{k}")
    meta = {k: int(tensors[f"meta.{k}"].item()) for k in _META}

    state = init_model_state(cfg, seed=0)
    restore_module_(state.generator, tensors, "generator")
    restore_module_(state.discriminator, tensors, "discriminator")
    state.ema = EmaState(
        shadow=_restore_named(state.ema.shadow, tensors, "ema"), decay=state.ema.decay
    )
    for prefix in ("g_opt", "d_opt"):
        opt: OptimizerState = getattr(state, prefix)
        opt.exp_avg = _restore_named(opt.exp_avg, tensors, f"{prefix}.exp_avg")
        opt.exp_avg_sq = _restore_named(opt.exp_avg_sq, tensors, f"{prefix}.exp_avg_sq")
        opt.step = meta[f"{prefix}_step"]

    state.epoch = meta["epoch"]
    state.step = meta["step"]
    state.d_steps = meta["d_steps"]
    seed = (meta["seed_hi"] << 32) | meta["seed_lo"]
    state.stream = RngStream(seed=seed, counter=meta["counter"])
    return state
