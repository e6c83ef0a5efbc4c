"""
Source root.

Package layout:
  src.lddgan.*  — Latent Denoising Diffusion GAN library, trainers and CLI
"""

__version__ = "1.0.0-dev"
