"""
Sample-quality metrics on raw features (2-D coordinates or flattened pixels).

* Fréchet distance between Gaussian fits:
  ``|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))``, with the trace
  term computed from the eigenvalues of the symmetric ``S_a^(1/2) S_b S_a^(1/2)``.
* Improved precision / recall with k-NN manifolds (k = 3 by default).
* 25-Gaussians mode coverage and high-quality fraction.

All computations run in float64.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import pandas as pd
import structlog
import torch

from src.lddgan._errors import ConfigError, ShapeError
from src.lddgan.data.datasets import MODE_SIGMA, mode_centers

_LOG = structlog.get_logger(__name__)

REPORT_COLUMNS = [
    "frechet", "precision", "recall", "modes", "hq_fraction", "nfe", "seconds", "n_samples",
]


def _features(x: torch.Tensor) -> torch.Tensor:
    return x.detach().reshape(x.shape[0], -1).to(torch.float64)


# ─────────────────────────── Fréchet distance ────────────────────────────────


@dataclass(eq=False)
class GaussianStats:
    mean: torch.Tensor
    cov: torch.Tensor

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian_stats(samples: torch.Tensor) -> GaussianStats:
    """Sample mean and unbiased covariance of ``(N, ...)`` samples.

    Raises
    ------
    ConfigError
        If there are fewer than ``dim + 1`` samples.
    """
    x = _features(samples)
    n, d = x.shape
    if n < d + 1:
        raise ConfigError("metrics", f"need at least {d + 1} samples in {d}-D, got {n}")
    mean = x.mean(dim=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    return GaussianStats(mean=mean, cov=0.5 * (cov + cov.T))


def _sqrt_psd(m: torch.Tensor) -> torch.Tensor:
    vals, vecs = torch.linalg.eigh(0.5 * (m + m.T))
    return (vecs * vals.clamp_min(0.0).sqrt()) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    if a.dim != b.dim:
        raise ShapeError("metrics", f"dimension mismatch: {a.dim} vs {b.dim}")
    root_a = _sqrt_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    eig = torch.linalg.eigvalsh(0.5 * (inner + inner.T)).clamp_min(0.0)
    diff = a.mean - b.mean
    value = float(diff @ diff + torch.trace(a.cov) + torch.trace(b.cov) - 2.0 * eig.sqrt().sum())
    return max(value, 0.0)


# ─────────────────────────── precision / recall ──────────────────────────────


def _distances(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return torch.cdist(a, b, compute_mode="donot_use_mm_for_euclid_dist")


def knn_radii(feats: torch.Tensor, k: int) -> torch.Tensor:
    """Distance from each point to its k-th nearest neighbour in the same set (self excluded)."""
    d = _distances(feats, feats)
    d.fill_diagonal_(float("inf"))
    return d.kthvalue(k, dim=1).values


def _coverage(points: torch.Tensor, manifold: torch.Tensor, radii: torch.Tensor) -> float:
    inside = _distances(points, manifold) <= radii[None, :]
    return float(inside.any(dim=1).double().mean())


def improved_precision_recall(
    real_feats: torch.Tensor, fake_feats: torch.Tensor, k: int = 3
) -> tuple[float, float]:
    """``precision`` = share of fakes inside the real k-NN manifold,
    ``recall`` = share of reals inside the fake k-NN manifold."""
    real, fake = _features(real_feats), _features(fake_feats)
    if real.shape[1] != fake.shape[1]:
        raise ShapeError("metrics", f"feature dims differ: {real.shape[1]} vs {fake.shape[1]}")
    if min(real.shape[0], fake.shape[0]) < k + 1:
        raise ConfigError("metrics", f"both sets need at least {k + 1} points")
    real_r, fake_r = knn_radii(real, k), knn_radii(fake, k)
    if not bool((real_r > 0).any()) or not bool((fake_r > 0).any()):
        _LOG.warning("metrics.degenerate_radii", real_zero=int((real_r == 0).sum()),
                     fake_zero=int((fake_r == 0).sum()))
    return _coverage(fake, real, real_r), _coverage(real, fake, fake_r)


# ─────────────────────────── 25-Gaussians ────────────────────────────────────


def mode_coverage_25g(samples: torch.Tensor) -> tuple[int, float]:
    """``(modes covered, high-quality fraction)`` against the 5x5 grid mixture.

    A sample is high quality when within 4 sigma of its nearest mode; a mode
    is covered when at least ``max(1, n / 500)`` high-quality samples fall on it.
    """
    x = _features(samples)
    if x.shape[1] != 2:
        raise ShapeError("metrics", f"mode coverage needs 2-D points, got {x.shape[1]}-D")
    centers = mode_centers(torch.float64)
    dist = _distances(x, centers)
    nearest = dist.argmin(dim=1)
    hq = dist.gather(1, nearest[:, None]).squeeze(1) <= 4.0 * MODE_SIGMA
    counts = torch.bincount(nearest[hq], minlength=centers.shape[0])
    need = max(1.0, x.shape[0] / 500.0)
    return int((counts >= need).sum()), float(hq.double().mean())


# ─────────────────────────── report ──────────────────────────────────────────


@dataclass
class MetricReport:
    frechet: float
    precision: float
    recall: float
    modes: int | None = None
    hq_fraction: float | None = None
    nfe: int | None = None
    seconds: float | None = None
    n_samples: int = 0

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    @staticmethod
    def csv_header() -> str:
        return ",".join(REPORT_COLUMNS)

    def csv_row(self) -> str:
        d = self.to_dict()
        return ",".join("" if d[c] is None else str(d[c]) for c in REPORT_COLUMNS)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.to_dict()], columns=REPORT_COLUMNS)

    def to_table(self) -> str:
        """Return a human-readable ASCII table; missing fields show as '-'."""
        lines = [f"{'Metric':<16} {'Value':>12}", "-" * 29]
        for name, value in self.to_dict().items():
            if value is None:
                cell = "-"
            elif isinstance(value, float):
                cell = f"{value:.4f}"
            else:
                cell = str(value)
            lines.append(f"{name:<16} {cell:>12}")
        return "\n".join(lines)


def evaluate_samples(
    real: torch.Tensor,
    fake: torch.Tensor,
    k: int = 3,
    nfe: int | None = None,
    seconds: float | None = None,
) -> MetricReport:
    """All metrics for one (real, fake) pair; mode coverage only for 2-D points."""
    frechet = frechet_distance(fit_gaussian_stats(real), fit_gaussian_stats(fake))
    precision, recall = improved_precision_recall(real, fake, k)
    modes = hq = None
    if _features(fake).shape[1] == 2:
        modes, hq = mode_coverage_25g(fake)
    return MetricReport(
        frechet=frechet,
        precision=precision,
        recall=recall,
        modes=modes,
        hq_fraction=hq,
        nfe=nfe,
        seconds=seconds,
        n_samples=fake.shape[0],
    )
