"""Few-step sampler with NFE and wall-clock accounting."""
from .sampler import (
    STATS_HEADER,
    SampleRequest,
    SampleStats,
    benchmark_sampling,
    denoise_step,
    latent_shape_for,
    sample,
    sampling_generator,
)

__all__ = [
    "STATS_HEADER",
    "SampleRequest",
    "SampleStats",
    "benchmark_sampling",
    "denoise_step",
    "latent_shape_for",
    "sample",
    "sampling_generator",
]
