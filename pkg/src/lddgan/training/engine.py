"""
GAN-phase training loop over cached latents.

One step (D and G alternate 1:1)::

    t       ~ U{1..T} per item
    x_{t-1} = q_sample(x0, t-1)          x_t = q_step(x_{t-1}, t)
    D step  : softplus(-D(real pair)) + softplus(D(fake pair)) [+ lazy R1]
    G step  : g_adv + lambda(epoch) * rec(x0, G(x_t, z, t))   (same x_t, fresh z)
    EMA     : shadow <- shadow + (1 - decay) * (G - shadow)

Usage
-----
::

    from src.lddgan.config import load_run_config
    from src.lddgan.training.engine import run_training

    result = run_training(load_run_config("configs/gaussians25.toml"))
    print(result.log_path, result.checkpoints[-1])
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import pandas as pd
import structlog
import torch
from tqdm.auto import tqdm

from src.lddgan._errors import ConfigError, NonFiniteError
from src.lddgan.autoencoder.training import encode_dataset, load_ae_checkpoint
from src.lddgan.config import RunConfig, dump_run_config
from src.lddgan.core.ema import ema_update
from src.lddgan.core.optim import adam_step, grads_for, module_params, write_params_
from src.lddgan.core.rng import RngStream
from src.lddgan.data.datasets import load_dataset
from src.lddgan.diffusion.schedule import (
    NoiseSchedule,
    build_schedule,
    posterior_sample,
    q_sample,
    q_step,
)
from src.lddgan.objectives.losses import (
    d_loss,
    g_adv_loss,
    g_total_loss,
    r1_penalty,
    rec_loss,
    resolve_lambda,
)
from src.lddgan.training.checkpoint import load_checkpoint, save_checkpoint
from src.lddgan.training.state import ModelState, init_model_state

_LOG = structlog.get_logger(__name__)

LOG_COLUMNS = ["step", "epoch", "t_mean", "d_loss", "g_adv", "g_rec", "lambda", "r1", "seconds"]
LOG_NAME = "train_log.csv"
CONFIG_NAME = "resolved_config.toml"
DIAGNOSTIC_NAME = "diagnostic.lddg"


@dataclass
class StepMetrics:
    step: int
    epoch: int
    t_mean: float
    d_loss: float
    g_adv: float
    g_rec: float
    lam: float
    r1: float
    r1_applied: bool = False
    seconds: float | None = None

    def row(self) -> dict[str, object]:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in LOG_COLUMNS}


def _guard(value: torch.Tensor, name: str, state: ModelState, diagnostic_dir: Path | None) -> None:
    if torch.isfinite(value).all():
        return
    if diagnostic_dir is not None:
        path = save_checkpoint(state, diagnostic_dir / DIAGNOSTIC_NAME)
        _LOG.error("train.diagnostic_written", path=str(path), loss=name)
    raise NonFiniteError("training", f"non-finite {name} at step {state.step}", name=name)


def _update(
    module: torch.nn.Module,
    loss: torch.Tensor,
    opt_name: str,
    state: ModelState,
    diagnostic_dir: Path | None,
) -> None:
    params = module_params(module)
    try:
        new_params, new_opt = adam_step(params, grads_for(loss, params), getattr(state, opt_name))
    except NonFiniteError:
        if diagnostic_dir is not None:
            save_checkpoint(state, diagnostic_dir / DIAGNOSTIC_NAME)
        raise
    write_params_(module, new_params)
    setattr(state, opt_name, new_opt)


def train_gan_step(
    latent_batch: torch.Tensor,
    state: ModelState,
    sched: NoiseSchedule,
    cfg: RunConfig,
    diagnostic_dir: Path | None = None,
) -> tuple[ModelState, StepMetrics]:
    """One discriminator step followed by one generator step.

    *latent_batch* is already encoded and scaled.  The networks in *state*
    are updated in place; the returned state carries the new optimizer
    moments, EMA shadow and counters.

    Raises
    ------
    NonFiniteError
        If a loss or gradient is NaN / Inf; a diagnostic checkpoint is
        written to *diagnostic_dir* first.
    """
    state = replace(state)
    obj = cfg.objectives
    x0 = latent_batch
    n, s = x0.shape[0], state.stream
    z_dim = cfg.generator.z_dim
    G, D = state.generator, state.discriminator
    lam = resolve_lambda(state.epoch, cfg.weighted_learning())

    # real pair: x_{t-1} from the marginal, x_t one forward step further
    t = s.integers(1, sched.T, (n,))
    x_prev = q_sample(x0, t - 1, s.gaussian(x0.shape, dtype=x0.dtype), sched)
    x_t = q_step(x_prev, t, s.gaussian(x0.shape, dtype=x0.dtype), sched)

    # ── discriminator ──
    real_logit = D(x_prev, x_t, t)
    z = s.gaussian((n, z_dim), dtype=x0.dtype)
    with torch.no_grad():
        x0_fake = G(x_t, z, t)
    fake_prev = posterior_sample(x0_fake, x_t, t, s.gaussian(x0.shape, dtype=x0.dtype), sched)
    d_adv = d_loss(real_logit, D(fake_prev, x_t, t), literal=obj.unbounded_d_loss)

    r1_applied = obj.r1_gamma > 0 and state.d_steps % obj.lazy_interval == 0
    r1 = x0.new_zeros(())
    d_total = d_adv
    if r1_applied:
        r1 = r1_penalty(D, x_prev, x_t, t, obj.r1_gamma)
        d_total = d_adv + obj.lazy_interval * r1
    _guard(d_total, "d_loss", state, diagnostic_dir)
    _update(D, d_total, "d_opt", state, diagnostic_dir)
    state.d_steps += 1

    # ── generator ──
    z = s.gaussian((n, z_dim), dtype=x0.dtype)
    x0_pred = G(x_t, z, t)
    gen_prev = posterior_sample(x0_pred, x_t, t, s.gaussian(x0.shape, dtype=x0.dtype), sched)
    g_adv = g_adv_loss(D(gen_prev, x_t, t))
    g_rec = rec_loss(x0, x0_pred, obj.rec_norm)
    g_total = g_total_loss(g_adv, g_rec, lam, obj.mode)
    _guard(g_total, "g_loss", state, diagnostic_dir)
    _update(G, g_total, "g_opt", state, diagnostic_dir)

    state.ema = ema_update(state.ema, module_params(G))
    state.step += 1
    metrics = StepMetrics(
        step=state.step,
        epoch=state.epoch,
        t_mean=float(t.double().mean()),
        d_loss=float(d_adv),
        g_adv=float(g_adv),
        g_rec=float(g_rec),
        lam=lam,
        r1=float(r1),
        r1_applied=r1_applied,
    )
    return state, metrics


# ─────────────────────────── data preparation ────────────────────────────────


def prepare_latents(cfg: RunConfig) -> torch.Tensor:
    """Training data in the GAN's space: points, or frozen-encoder latents (scaled).

    ``tensor_file`` datasets are taken to be in that space already.
    """
    data = load_dataset(cfg.dataset, channels=cfg.autoencoder.image_channels)
    if not cfg.dataset.is_image:
        return data
    if not cfg.training.ae_checkpoint:
        raise ConfigError("training", "image datasets need training.ae_checkpoint")
    ae = load_ae_checkpoint(cfg.training.ae_checkpoint, cfg.autoencoder)
    latents = encode_dataset(data, ae)
    _LOG.info("train.latents_cached", shape=list(latents.shape), scale=float(ae.latent_scale))
    return latents


# ─────────────────────────── run loop ────────────────────────────────────────


@dataclass
class TrainResult:
    state: ModelState
    output_dir: Path
    log_path: Path
    checkpoints: list[Path] = field(default_factory=list)
    lambdas: dict[int, float] = field(default_factory=dict)


def _append_log(path: Path, rows: list[dict[str, object]]) -> None:
    frame = pd.DataFrame(rows, columns=LOG_COLUMNS)
    frame.to_csv(path, mode="a", header=not path.exists(), index=False)


def run_training(
    cfg: RunConfig,
    resume_from: str | Path | None = None,
    seed: int | None = None,
    latents: torch.Tensor | None = None,
    quiet: bool = True,
) -> TrainResult:
    """Run the GAN phase for ``training.num_epochs`` epochs.

    Batches are visited in a seed-derived order that depends only on the
    epoch index, so a resumed run sees the same batches as a fresh one.
    """
    tc = cfg.training
    seed = cfg.resolved_seed(seed)
    cfg = cfg.model_copy(update={"training": tc.model_copy(update={"seed": seed})})
    torch.set_num_threads(tc.threads)
    torch.use_deterministic_algorithms(True, warn_only=True)

    out = Path(tc.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / CONFIG_NAME).write_text(dump_run_config(cfg), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot prepare output directory {out}: {exc}") from exc

    sc = cfg.schedule
    sched = build_schedule(sc.T, sc.beta_min, sc.beta_max, sc.kind, strict=sc.strict)
    data = latents if latents is not None else prepare_latents(cfg)
    data = data.to(torch.get_default_dtype())

    if resume_from is not None:
        state = load_checkpoint(resume_from, cfg)
        _LOG.info("train.resume", path=str(resume_from), epoch=state.epoch, step=state.step)
    else:
        state = init_model_state(cfg, seed)

    log_path = out / LOG_NAME
    if resume_from is None and log_path.exists():
        log_path.unlink()
    result = TrainResult(state=state, output_dir=out, log_path=log_path)
    order_root = RngStream(seed).derive("batch-order")
    n, bs = data.shape[0], tc.batch_size
    wl = cfg.weighted_learning()
    started = time.perf_counter()

    epochs = range(state.epoch, tc.num_epochs)
    for epoch in tqdm(epochs, desc="train", disable=quiet):
        state.epoch = epoch
        result.lambdas[epoch] = resolve_lambda(epoch, wl)
        order = order_root.derive(f"epoch-{epoch}").permutation(n)
        rows: list[dict[str, object]] = []
        for start in range(0, n, bs):
            state, metrics = train_gan_step(data[order[start : start + bs]], state, sched, cfg, out)
            if tc.log_wall_clock:
                metrics.seconds = time.perf_counter() - started
            rows.append(metrics.row())
        _append_log(log_path, rows)
        last = rows[-1]
        _LOG.info(
            "train.epoch",
            epoch=epoch,
            step=state.step,
            lam=last["lambda"],
            d_loss=last["d_loss"],
            g_adv=last["g_adv"],
            g_rec=last["g_rec"],
        )
        state.epoch = epoch + 1
        if tc.checkpoint_every and state.epoch % tc.checkpoint_every == 0:
            result.checkpoints.append(
                save_checkpoint(state, out / f"checkpoint_epoch{state.epoch:05d}.lddg")
            )

    result.checkpoints.append(save_checkpoint(state, out / "checkpoint_final.lddg"))
    result.state = state
    _LOG.info("train.done", epochs=state.epoch, steps=state.step, output=str(out))
    return result
