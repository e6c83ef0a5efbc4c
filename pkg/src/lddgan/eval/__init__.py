"""
Evaluation: metrics and ablation harnesses.

::

    from src.lddgan.eval import evaluate_samples, frechet_distance, fit_gaussian_stats
"""
from .metrics import (
    GaussianStats,
    MetricReport,
    evaluate_samples,
    fit_gaussian_stats,
    frechet_distance,
    improved_precision_recall,
    knn_radii,
    mode_coverage_25g,
)

__all__ = [
    "GaussianStats",
    "MetricReport",
    "evaluate_samples",
    "fit_gaussian_stats",
    "frechet_distance",
    "improved_precision_recall",
    "knn_radii",
    "mode_coverage_25g",
]
