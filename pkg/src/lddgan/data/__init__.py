"""Datasets and on-disk formats (LDDG bundles, LDDT tensors, PGM images)."""
from .datasets import (
    MODE_SIGMA,
    generate_25gaussians,
    generate_toy_images,
    load_dataset,
    mode_centers,
)
from .pgm import load_pgm_dir, write_pgm_grid
from .tensor_io import load_tensor_file, read_bundle, save_tensor_file, write_bundle

__all__ = [
    "MODE_SIGMA",
    "generate_25gaussians",
    "generate_toy_images",
    "load_dataset",
    "load_pgm_dir",
    "load_tensor_file",
    "mode_centers",
    "read_bundle",
    "save_tensor_file",
    "write_bundle",
    "write_pgm_grid",
]
