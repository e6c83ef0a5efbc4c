"""
lddgan command-line entry point.

Usage
-----
::

    lddgan schedule --T 4 --beta-min 0.1 --beta-max 0.9
    lddgan train-ae --config configs/toy_images.toml --seed 1
    lddgan train    --config configs/gaussians25.toml --seed 1
    lddgan sample   --checkpoint runs/g25/checkpoint_final.lddg --count 100 --out samples.lddt
    lddgan eval     --real real.lddt --fake samples.lddt
    lddgan ablate   --config configs/gaussians25.toml --study wl --out runs/ablate

    python -m src.lddgan.cli --help

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime.
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import structlog

from src.lddgan._errors import ConfigError, LDDGANError

_LOG = structlog.get_logger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _configure_logging(verbose: bool = False) -> None:
    renderer = (
        structlog.dev.ConsoleRenderer()
        if sys.stderr.isatty()
        else structlog.processors.JSONRenderer()
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.DEBUG if verbose else logging.INFO
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


# ─────────────────────────── helpers ─────────────────────────────────────────


def _load_config(  # noqa: ANN202
    path: str | Path, seed: int | None = None, sampling: dict | None = None
):
    from src.lddgan.config import dump_run_config, load_run_config, with_overrides

    cfg = load_run_config(path)
    cfg = with_overrides(cfg, training={"seed": cfg.resolved_seed(seed)}, sampling=sampling or {})
    _LOG.info("cli.resolved_config", path=str(path), toml=dump_run_config(cfg))
    return cfg


# ─────────────────────────── commands ────────────────────────────────────────


def _cmd_schedule(args: argparse.Namespace) -> int:
    from src.lddgan.diffusion.schedule import build_schedule

    sched = build_schedule(args.T, args.beta_min, args.beta_max, args.kind, strict=False)
    sched.to_frame().to_csv(sys.stdout, index=False, lineterminator="\n")
    return EXIT_OK


def _cmd_train_ae(args: argparse.Namespace) -> int:
    from src.lddgan.autoencoder.training import run_ae_training, save_ae_checkpoint

    cfg = _load_config(args.config, args.seed)
    out = Path(args.out or cfg.training.output_dir)
    result = run_ae_training(cfg, quiet=args.quiet, output_dir=out)
    path = save_ae_checkpoint(result.ae, out / "autoencoder.lddg")
    _LOG.info(
        "cli.train_ae_done",
        checkpoint=str(path),
        mse=result.history[-1],
        epochs_to_target=result.epochs_to_target,
    )
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    from src.lddgan.training.engine import run_training

    cfg = _load_config(args.config, args.seed)
    result = run_training(cfg, resume_from=args.resume, quiet=args.quiet)
    _LOG.info("cli.train_done", checkpoint=str(result.checkpoints[-1]), log=str(result.log_path))
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    from src.lddgan.autoencoder.training import load_ae_checkpoint
    from src.lddgan.data.pgm import write_pgm_grid
    from src.lddgan.data.tensor_io import save_tensor_file
    from src.lddgan.diffusion.schedule import build_schedule
    from src.lddgan.sampling.sampler import (
        STATS_HEADER,
        SampleRequest,
        latent_shape_for,
        sample,
    )
    from src.lddgan.training.checkpoint import load_checkpoint

    ckpt = Path(args.checkpoint)
    overrides = {
        "count": args.count,
        "seed": args.seed,
        "T": args.T,
        "use_ema": False if args.raw else None,
        "decode": False if args.latent else None,
    }
    cfg = _load_config(args.config or ckpt.parent / "resolved_config.toml", sampling=overrides)
    sp = cfg.sampling
    sc = cfg.schedule
    sched = build_schedule(sc.T, sc.beta_min, sc.beta_max, sc.kind, strict=sc.strict)
    state = load_checkpoint(ckpt, cfg)

    ae = None
    decode = cfg.dataset.is_image and sp.decode
    if decode:
        if not cfg.training.ae_checkpoint:
            raise ConfigError("sample", "image sampling needs training.ae_checkpoint")
        ae = load_ae_checkpoint(cfg.training.ae_checkpoint, cfg.autoencoder)

    req = SampleRequest(
        count=sp.count, seed=sp.seed, t_override=sp.T, use_ema=sp.use_ema, decode=decode
    )
    samples, stats = sample(req, state, sched, latent_shape_for(cfg), ae)
    if args.out:
        out = save_tensor_file(args.out, samples.detach().float())
        _LOG.info("cli.samples_written", path=str(out), shape=list(samples.shape))
        if decode:
            grid = write_pgm_grid(Path(args.out).with_suffix(".pgm"), samples[:, :1])
            _LOG.info("cli.grid_written", path=str(grid))
    print(STATS_HEADER)
    print(stats.csv_line())
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    from src.lddgan.data.tensor_io import load_tensor_file
    from src.lddgan.eval.metrics import MetricReport, evaluate_samples

    real = load_tensor_file(args.real)
    fake = load_tensor_file(args.fake)
    report = evaluate_samples(real, fake, k=args.k, nfe=args.nfe, seconds=args.seconds)
    if args.table:
        print(report.to_table())
        return EXIT_OK
    print(MetricReport.csv_header())
    print(report.csv_row())
    return EXIT_OK


def _cmd_ablate(args: argparse.Namespace) -> int:
    from src.lddgan.eval.ablations import ascii_table, run_kl_ablation, run_wl_ablation

    cfg = _load_config(args.config)
    out = Path(args.out)
    seeds = tuple(args.seeds)
    if args.study == "wl":
        _, summary = run_wl_ablation(cfg, out, seeds=seeds, quiet=args.quiet)
        print(ascii_table(summary, "Weighted Learning ablation (medians)"))
    else:
        _, summary = run_kl_ablation(cfg, out, seeds=seeds, quiet=args.quiet)
        print(ascii_table(summary, "KL-penalty ablation (medians)"))
    print(f"\nAblation outputs written to {out}/")
    return EXIT_OK


# ─────────────────────────── parser ──────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lddgan", description="Latent Denoising Diffusion GAN toolkit.")
    parser.add_argument("--verbose", action="store_true", help="Debug-level logging")
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("schedule", help="Dump the noise schedule as CSV")
    p.add_argument("--T", type=int, default=4)
    p.add_argument("--beta-min", type=float, default=0.1)
    p.add_argument("--beta-max", type=float, default=0.9999)
    p.add_argument("--kind", choices=["linear", "geometric"], default="linear")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("train-ae", help="Train the autoencoder")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="Output directory (default: training.output_dir)")
    p.set_defaults(func=_cmd_train_ae)

    p = sub.add_parser("train", help="Train the denoising GAN")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resume", default=None, help="Checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="Generate samples from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", default=None, help="Default: resolved_config.toml beside checkpoint")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--out", default=None, help="LDDT file for the samples")
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--raw", action="store_true", help="Use raw instead of EMA weights")
    p.add_argument("--latent", action="store_true", help="Skip decoding")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="Score fake samples against real ones")
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--nfe", type=int, default=None)
    p.add_argument("--seconds", type=float, default=None)
    p.add_argument("--table", action="store_true", help="ASCII table instead of CSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="Run an ablation study")
    p.add_argument("--config", required=True)
    p.add_argument("--study", choices=["wl", "kl"], default="wl")
    p.add_argument("--out", default="runs/ablate")
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.set_defaults(func=_cmd_ablate)
    return parser


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    _configure_logging(args.verbose)
    try:
        return int(args.func(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LDDGANError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
