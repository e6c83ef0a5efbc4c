"""
Ablation study runners.

Weighted Learning study (25-Gaussians, vector mode)
---------------------------------------------------
Three generator objectives trained under identical data and seeds:

  +------------------+-------------+---------------------------+
  | Arm              | Rec. loss   | Weight                    |
  +------------------+-------------+---------------------------+
  | adversarial_only |     ✗       | 0                         |
  | linear_fixed     |     ✓       | fixed lambda              |
  | weighted         |     ✓       | lambda(epoch), decaying   |
  +------------------+-------------+---------------------------+

KL study (toy images)
---------------------
Autoencoders with and without the KL penalty; records the first epoch
whose reconstruction MSE falls below ``autoencoder.mse_target``, then
trains the GAN phase on each autoencoder's latents and scores decoded
samples (Fréchet distance, precision, recall).

Both studies run seeds {1, 2, 3}, report per-seed rows plus per-arm
medians, write CSV and booktabs LaTeX, and render ASCII tables.

Usage
-----
::

    from src.lddgan.eval.ablations import run_wl_ablation, ascii_table

    runs, summary = run_wl_ablation(cfg, output_dir=Path("runs/ablate"))
    print(ascii_table(summary, "Weighted Learning ablation"))
"""
from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Any

import pandas as pd
import structlog

from src.lddgan._errors import ConfigError
from src.lddgan.autoencoder.training import encode_dataset, run_ae_training
from src.lddgan.config import RunConfig, with_overrides
from src.lddgan.data.datasets import generate_25gaussians, load_dataset
from src.lddgan.diffusion.schedule import build_schedule
from src.lddgan.eval.metrics import evaluate_samples
from src.lddgan.sampling.sampler import SampleRequest, latent_shape_for, sample
from src.lddgan.training.engine import run_training

_LOG = structlog.get_logger(__name__)

WL_ARMS = ["adversarial_only", "linear_fixed", "weighted"]
KL_ARMS = ["no_kl", "kl"]
SEEDS = (1, 2, 3)
HELD_OUT_OFFSET = 1_000


def _override(cfg: RunConfig, section: str, **values: Any) -> RunConfig:
    """Copy of *cfg* with ``cfg.<section>`` fields replaced; ``None`` keeps the old value.

    Raises
    ------
    ConfigError
        If the overridden config fails validation.
    """
    return with_overrides(cfg, **{section: values})


# ─────────────────────────── LaTeX / ASCII ───────────────────────────────────


def booktabs_table(
    summary: pd.DataFrame, caption: str, label: str, seeds: Sequence[int] = SEEDS
) -> str:
    """Return LaTeX source for a per-arm median table."""
    cols = [c for c in summary.columns if c != "arm"]
    esc = r"\_"
    rows = []
    for _, r in summary.iterrows():
        cells = " & ".join(
            f"{r[c]:.3f}" if isinstance(r[c], float) else str(r[c]) for c in cols
        )
        arm = str(r["arm"]).replace("_", esc)
        rows.append(f"{arm} & {cells} \\\\")
    header = " & ".join(c.replace("_", esc) for c in cols)
    body = "\n".join(rows)
    seed_list = ", ".join(map(str, seeds))
    spec = "l" + "c" * len(cols)
    return rf"""
\begin{{table}}[ht]
\centering
\caption{{{caption} Medians over seeds {seed_list}.}}
\label{{{label}}}
\begin{{tabular}}{{{spec}}}
\toprule
Arm & {header} \\
\midrule
{body}
\bottomrule
\end{{tabular}}
\end{{table}}
"""


def ascii_table(summary: pd.DataFrame, title: str) -> str:
    col_w = 18
    cols = [c for c in summary.columns if c != "arm"]
    header = f"{'Arm':<{col_w}}" + "".join(f" {c[:11]:>11}" for c in cols)
    sep = "-" * len(header)
    lines = [f"\n{title}", sep, header, sep]
    for _, r in summary.iterrows():
        cells = "".join(
            f" {r[c]:>11.4f}" if isinstance(r[c], float) else f" {str(r[c]):>11}" for c in cols
        )
        lines.append(f"{str(r['arm']):<{col_w}}{cells}")
    lines.append(sep)
    return "\n".join(lines)


def _summarize(runs: pd.DataFrame, arms: Sequence[str]) -> pd.DataFrame:
    metrics = [c for c in runs.columns if c not in ("arm", "seed")]
    summary = runs.groupby("arm", sort=False)[metrics].median().reset_index()
    summary["arm"] = pd.Categorical(summary["arm"], categories=list(arms), ordered=True)
    summary = summary.sort_values("arm").reset_index(drop=True)
    summary["arm"] = summary["arm"].astype(str)
    return summary


def _persist(
    runs: pd.DataFrame, summary: pd.DataFrame, out_dir: Path, stem: str, caption: str
) -> None:
    seeds = sorted(int(s) for s in runs["seed"].unique())
    out_dir.mkdir(parents=True, exist_ok=True)
    runs.to_csv(out_dir / f"{stem}_runs.csv", index=False)
    summary.to_csv(out_dir / f"{stem}.csv", index=False)
    (out_dir / f"{stem}.tex").write_text(
        booktabs_table(summary, caption, f"tab:{stem}", seeds), encoding="utf-8"
    )


# ─────────────────────────── Weighted Learning study ─────────────────────────


def run_wl_ablation(
    cfg: RunConfig,
    output_dir: Path,
    seeds: Sequence[int] = SEEDS,
    arms: Sequence[str] = WL_ARMS,
    n_eval: int = 10_000,
    quiet: bool = True,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Train every (arm, seed) on 25-Gaussians and score 10^4 EMA samples.

    Returns per-run rows and per-arm medians (columns ``arm, frechet,
    precision, recall, modes, hq_fraction``).
    """
    if cfg.dataset.kind != "gaussians25":
        raise ConfigError("ablate", "the Weighted Learning study runs on gaussians25 data")
    data = load_dataset(cfg.dataset)
    held_out = generate_25gaussians(n_eval, cfg.dataset.seed + HELD_OUT_OFFSET, stratified=True)
    sc = cfg.schedule
    sched = build_schedule(sc.T, sc.beta_min, sc.beta_max, sc.kind, strict=sc.strict)

    rows = []
    for arm in arms:
        for seed in seeds:
            run_cfg = _override(
                _override(cfg, "objectives", mode=arm),
                "training",
                seed=seed,
                output_dir=str(output_dir / arm / f"seed{seed}"),
            )
            result = run_training(run_cfg, latents=data, quiet=quiet)
            fake, _ = sample(
                SampleRequest(
                    count=n_eval, seed=seed, use_ema=cfg.sampling.use_ema, decode=False
                ),
                result.state,
                sched,
                latent_shape_for(run_cfg),
            )
            report = evaluate_samples(held_out, fake)
            rows.append(
                {
                    "arm": arm,
                    "seed": seed,
                    "frechet": report.frechet,
                    "precision": report.precision,
                    "recall": report.recall,
                    "modes": report.modes,
                    "hq_fraction": report.hq_fraction,
                }
            )
            _LOG.info("ablate.wl_run", **rows[-1])

    runs = pd.DataFrame(rows)
    summary = _summarize(runs, arms)
    _persist(
        runs, summary, output_dir, "wl_ablation",
        "Contribution of the reconstruction loss and its epoch-dependent weight.",
    )
    return runs, summary


# ─────────────────────────── KL study ────────────────────────────────────────


def run_kl_ablation(
    cfg: RunConfig,
    output_dir: Path,
    seeds: Sequence[int] = SEEDS,
    train_gan: bool = True,
    gan_epochs: int | None = None,
    n_eval: int | None = None,
    quiet: bool = True,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Autoencoders with and without the KL penalty, then a GAN on each one's latents.

    Per run: epochs until the reconstruction target (``num_epochs + 1`` if
    never reached) and the final MSE.  With *train_gan* the GAN phase is
    trained for *gan_epochs* (default ``training.num_epochs``) on the
    encoded data, and ``n_eval`` decoded samples (default: the dataset
    size) are scored against the training images in pixel space, adding
    ``frechet, precision, recall``.
    """
    images = load_dataset(cfg.dataset, channels=cfg.autoencoder.image_channels)
    never = cfg.autoencoder.num_epochs + 1
    n_eval = n_eval or images.shape[0]
    sc = cfg.schedule
    sched = build_schedule(sc.T, sc.beta_min, sc.beta_max, sc.kind, strict=sc.strict)

    rows = []
    for arm in KL_ARMS:
        arm_cfg = _override(cfg, "autoencoder", use_kl_penalty=arm == "kl")
        for seed in seeds:
            ae_result = run_ae_training(
                arm_cfg, images=images, seed=seed, stop_at_target=True, quiet=quiet
            )
            row: dict[str, Any] = {
                "arm": arm,
                "seed": seed,
                "epochs_to_target": ae_result.epochs_to_target or never,
                "final_mse": ae_result.history[-1],
            }
            if train_gan:
                run_cfg = _override(
                    arm_cfg,
                    "training",
                    seed=seed,
                    num_epochs=gan_epochs,
                    output_dir=str(output_dir / arm / f"seed{seed}"),
                )
                latents = encode_dataset(images, ae_result.ae)
                result = run_training(run_cfg, latents=latents, quiet=quiet)
                fake, _ = sample(
                    SampleRequest(count=n_eval, seed=seed, use_ema=cfg.sampling.use_ema),
                    result.state,
                    sched,
                    latent_shape_for(run_cfg),
                    ae=ae_result.ae,
                )
                report = evaluate_samples(images, fake)
                row.update(
                    frechet=report.frechet, precision=report.precision, recall=report.recall
                )
            rows.append(row)
            _LOG.info("ablate.kl_run", **row)

    runs = pd.DataFrame(rows)
    summary = _summarize(runs, KL_ARMS)
    _persist(
        runs, summary, output_dir, "kl_ablation",
        "Autoencoder epochs to the reconstruction target and downstream sample quality "
        "with and without a KL penalty.",
    )
    return runs, summary
