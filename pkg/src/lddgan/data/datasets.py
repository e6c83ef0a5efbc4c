"""
Training datasets.

* ``gaussians25`` — mixture of 25 isotropic Gaussians (sigma 0.05) centred on
  the grid ``{-4, -2, 0, 2, 4}^2`` with uniform weights.
* ``toy_images``  — deterministic single-channel rectangles and discs.
* ``image_dir``   — a directory of binary PGM files.
* ``tensor_file`` — one LDDT tensor.

Synthetic kinds are pure functions of ``(count, seed)``.
"""
from __future__ import annotations

import torch

from src.lddgan._errors import ConfigError
from src.lddgan.config import DatasetSpec
from src.lddgan.core.rng import RngStream
from src.lddgan.data.pgm import load_pgm_dir
from src.lddgan.data.tensor_io import load_tensor_file

GRID_VALUES = (-4.0, -2.0, 0.0, 2.0, 4.0)
MODE_SIGMA = 0.05


def mode_centers(dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """The 25 mixture centres, row-major over ``(x, y)``, shape ``(25, 2)``."""
    g = torch.tensor(GRID_VALUES, dtype=dtype)
    xs, ys = torch.meshgrid(g, g, indexing="ij")
    return torch.stack([xs.reshape(-1), ys.reshape(-1)], dim=1)


def generate_25gaussians(
    n: int, seed: int, dtype: torch.dtype = torch.float32, stratified: bool = False
) -> torch.Tensor:
    """Draw *n* points from the 25-Gaussian grid mixture, shape ``(n, 2)``.

    Components are i.i.d. uniform over the 25 modes.  With *stratified* they
    are a shuffled round-robin instead, so per-mode counts differ by at most
    one; evaluation sets use this to keep small reference sets balanced.
    """
    if n < 1:
        raise ConfigError("data", f"n must be >= 1, got {n}")
    stream = RngStream(seed).derive("gaussians25")
    centers = mode_centers(torch.float64)
    k = centers.shape[0]
    if stratified:
        comps = (torch.arange(n) % k)[stream.permutation(n)]
    else:
        comps = stream.integers(0, k - 1, (n,))
    noise = stream.gaussian((n, 2), dtype=torch.float64)
    return (centers[comps] + MODE_SIGMA * noise).to(dtype)


def generate_toy_images(
    n: int, size: int = 16, seed: int = 0, channels: int = 1
) -> torch.Tensor:
    """Images of one bright rectangle or disc on a dark field, pixels in ``[-1, 1]``.

    Shape ``(n, channels, size, size)``; channels share the same content.
    """
    if n < 1 or size < 4:
        raise ConfigError("data", f"need n >= 1 and size >= 4, got n={n}, size={size}")
    stream = RngStream(seed).derive("toy_images")
    u = stream.uniform((n, 6), dtype=torch.float64)
    coords = (torch.arange(size, dtype=torch.float64) + 0.5) / size
    yy, xx = torch.meshgrid(coords, coords, indexing="ij")
    yy, xx = yy[None], xx[None]

    cx = (0.25 + 0.5 * u[:, 0])[:, None, None]
    cy = (0.25 + 0.5 * u[:, 1])[:, None, None]
    extent = (0.12 + 0.18 * u[:, 2])[:, None, None]
    is_disc = (u[:, 3] < 0.5)[:, None, None]
    level = (0.5 + 0.5 * u[:, 4])[:, None, None]
    background = (0.1 * u[:, 5])[:, None, None]

    disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= extent**2
    rect = ((xx - cx).abs() <= extent) & ((yy - cy).abs() <= extent * 0.7)
    mask = torch.where(is_disc, disc, rect)
    img = torch.where(mask, level, background)
    img = (img * 2.0 - 1.0).to(torch.float32)
    return img[:, None].expand(n, channels, size, size).contiguous()


def load_dataset(spec: DatasetSpec, channels: int = 1) -> torch.Tensor:
    """Materialize the dataset described by *spec* as one float32 tensor."""
    if spec.kind == "gaussians25":
        return generate_25gaussians(spec.count, spec.seed)
    if spec.kind == "toy_images":
        return generate_toy_images(spec.count, spec.image_size, spec.seed, channels)
    if spec.kind == "image_dir":
        return load_pgm_dir(spec.path or "", normalize=spec.normalize)
    if spec.kind == "tensor_file":
        return load_tensor_file(spec.path or "").to(torch.float32)
    raise ConfigError("data", f"unknown dataset kind {spec.kind!r}")
