"""
Autoencoder training phase.

One step optimizes pixel L1, plus ``kl_weight * KL`` and
``patch_weight * patch adversarial`` when those flags are on.  The loop
tracks full-set reconstruction MSE per epoch and records the first epoch
reaching ``mse_target``.  After training the global latent scale is set so
scaled latents have unit std.

Usage
-----
::

    from src.lddgan.autoencoder.training import run_ae_training

    result = run_ae_training(cfg)
    print(result.epochs_to_target, result.history[-1])
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import structlog
import torch
from tqdm.auto import tqdm

from src.lddgan._errors import NonFiniteError
from src.lddgan.autoencoder.model import (
    Autoencoder,
    decode,
    encode,
    encode_with_moments,
    kl_penalty,
    reconstruction_l1,
)
from src.lddgan.config import AutoencoderConfig, RunConfig
from src.lddgan.core.optim import OptimizerState, adam_step, grads_for, write_params_
from src.lddgan.core.rng import RngStream, seeded
from src.lddgan.data.datasets import load_dataset
from src.lddgan.data.tensor_io import module_tensors, read_bundle, restore_module_, write_bundle
from src.lddgan.objectives.losses import d_loss, g_adv_loss

_LOG = structlog.get_logger(__name__)

DIAGNOSTIC_NAME = "diagnostic.lddg"


@dataclass
class AEOptState:
    ae: OptimizerState
    patch: OptimizerState | None = None

    @classmethod
    def create(cls, ae: Autoencoder, cfg: AutoencoderConfig) -> AEOptState:
        betas = (0.5, 0.9)
        patch = (
            OptimizerState.for_params(ae.patch_params(), cfg.lr, betas)
            if ae.patch is not None
            else None
        )
        return cls(ae=OptimizerState.for_params(ae.ae_params(), cfg.lr, betas), patch=patch)


@dataclass
class AELossBreakdown:
    l1: float
    kl: float
    patch_g: float
    patch_d: float
    total: float


def _dump_diagnostic(ae: Autoencoder, directory: Path | None) -> Path | None:
    if directory is None:
        return None
    path = write_bundle(directory / DIAGNOSTIC_NAME, module_tensors(ae, "ae"))
    _LOG.error("ae.diagnostic_written", path=str(path))
    return path


def ae_train_step(
    batch: torch.Tensor,
    ae: Autoencoder,
    opt: AEOptState,
    cfg: AutoencoderConfig,
    stream: RngStream,
    diagnostic_dir: Path | None = None,
) -> tuple[AEOptState, AELossBreakdown]:
    """One optimizer step; *ae* parameters are updated in place.

    Raises
    ------
    NonFiniteError
        If the loss is NaN / Inf (a diagnostic bundle is written first when
        *diagnostic_dir* is given).
    """
    out = encode_with_moments(batch, ae, stream if cfg.use_kl_penalty else None)
    recon = ae.decoder(out.latent)
    l1 = reconstruction_l1(batch, recon)
    if cfg.use_kl_penalty and out.logvar is not None:
        kl = kl_penalty(out.mu, out.logvar)
    else:
        kl = recon.new_zeros(())
    patch_g = g_adv_loss(ae.patch(recon)) if ae.patch is not None else recon.new_zeros(())
    total = l1 + cfg.kl_weight * kl + cfg.patch_weight * patch_g
    if not torch.isfinite(total):
        _dump_diagnostic(ae, diagnostic_dir)
        raise NonFiniteError("autoencoder", f"non-finite loss {float(total)}", name="total")

    params = ae.ae_params()
    new_params, ae_state = adam_step(params, grads_for(total, params), opt.ae)
    write_params_(ae, new_params)

    patch_d = 0.0
    patch_state = opt.patch
    if ae.patch is not None and opt.patch is not None:
        d = d_loss(ae.patch(batch), ae.patch(recon.detach()))
        pp = ae.patch_params()
        new_pp, patch_state = adam_step(pp, grads_for(d, pp), opt.patch)
        write_params_(ae, new_pp)
        patch_d = float(d)

    losses = AELossBreakdown(
        l1=float(l1), kl=float(kl), patch_g=float(patch_g), patch_d=patch_d, total=float(total)
    )
    return AEOptState(ae=ae_state, patch=patch_state), losses


# ─────────────────────────── evaluation helpers ──────────────────────────────


@torch.no_grad()
def reconstruction_mse(images: torch.Tensor, ae: Autoencoder, batch_size: int = 256) -> float:
    total = 0.0
    for start in range(0, images.shape[0], batch_size):
        x = images[start : start + batch_size]
        total += float(((decode(encode(x, ae), ae, image_size=x.shape[-1]) - x) ** 2).sum())
    return total / images.numel()


@torch.no_grad()
def encode_dataset(images: torch.Tensor, ae: Autoencoder, batch_size: int = 256) -> torch.Tensor:
    """Scaled latents ``encode(x) * latent_scale`` for the whole set."""
    parts = [encode(images[s : s + batch_size], ae) for s in range(0, images.shape[0], batch_size)]
    return torch.cat(parts) * ae.latent_scale


@torch.no_grad()
def fit_latent_scale(images: torch.Tensor, ae: Autoencoder) -> float:
    ae.latent_scale.fill_(1.0)
    std = float(encode_dataset(images, ae).std())
    scale = 1.0 / std if std > 0 else 1.0
    ae.latent_scale.fill_(scale)
    return scale


# ─────────────────────────── training loop ───────────────────────────────────


@dataclass
class AETrainResult:
    ae: Autoencoder
    history: list[float] = field(default_factory=list)
    epochs_to_target: int | None = None
    steps: int = 0
    latent_scale: float = 1.0


def run_ae_training(
    cfg: RunConfig,
    images: torch.Tensor | None = None,
    seed: int | None = None,
    stop_at_target: bool = False,
    quiet: bool = True,
    output_dir: Path | None = None,
) -> AETrainResult:
    """Train an autoencoder on *images* (default: the configured dataset)."""
    acfg = cfg.autoencoder
    if images is None:
        images = load_dataset(cfg.dataset, channels=acfg.image_channels)
    stream = RngStream(cfg.resolved_seed(seed)).derive("autoencoder")
    with seeded(stream.derive("init")):
        ae = Autoencoder(acfg)
    opt = AEOptState.create(ae, acfg)
    batches = stream.derive("batches")
    noise = stream.derive("noise")

    result = AETrainResult(ae=ae)
    n = images.shape[0]
    _LOG.info("ae.start", images=n, f=acfg.f, kl=acfg.use_kl_penalty, epochs=acfg.num_epochs)
    for epoch in tqdm(range(1, acfg.num_epochs + 1), desc="autoencoder", disable=quiet):
        order = batches.permutation(n)
        for start in range(0, n, acfg.batch_size):
            batch = images[order[start : start + acfg.batch_size]]
            opt, losses = ae_train_step(batch, ae, opt, acfg, noise, output_dir)
            result.steps += 1
        mse = reconstruction_mse(images, ae)
        result.history.append(mse)
        _LOG.debug("ae.epoch", epoch=epoch, mse=mse, l1=losses.l1, kl=losses.kl)
        if result.epochs_to_target is None and mse < acfg.mse_target:
            result.epochs_to_target = epoch
            if stop_at_target:
                break

    result.latent_scale = fit_latent_scale(images, ae)
    _LOG.info(
        "ae.done",
        epochs=len(result.history),
        mse=result.history[-1],
        epochs_to_target=result.epochs_to_target,
        latent_scale=result.latent_scale,
    )
    return result


# ─────────────────────────── checkpoints ─────────────────────────────────────


def save_ae_checkpoint(ae: Autoencoder, path: str | Path) -> Path:
    return write_bundle(path, module_tensors(ae, "ae"))


def load_ae_checkpoint(path: str | Path, cfg: AutoencoderConfig) -> Autoencoder:
    """Rebuild an autoencoder from *cfg* and load its tensors from *path*."""
    ae = Autoencoder(cfg)
    restore_module_(ae, read_bundle(path), "ae")
    ae.eval()
    return ae
