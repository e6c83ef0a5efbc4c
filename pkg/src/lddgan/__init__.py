"""
lddgan — desk-scale Latent Denoising Diffusion GAN.

Few-step diffusion in a learned latent space with an x0-predicting
conditional GAN denoiser.

Sub-packages:
  core         — seeded randomness, gradient checks, Adam, EMA
  diffusion    — variance schedule, forward process, posterior
  autoencoder  — KL-free latent autoencoder (KL kept for the ablation)
  gan          — z-conditioned generator and time-conditioned discriminator
  objectives   — adversarial / reconstruction losses, Weighted Learning, R1
  training     — GAN training loop, checkpoints, run bookkeeping
  sampling     — few-step sampler with NFE and wall-clock accounting
  eval         — Fréchet distance, improved precision/recall, mode coverage,
                 ablation harnesses
  data         — datasets and tensor / PGM file formats
"""

__version__ = "1.0.0-dev"
