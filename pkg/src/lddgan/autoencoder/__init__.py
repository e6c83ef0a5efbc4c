"""Latent autoencoder (KL-free by default) and its training phase."""
from .model import (
    Autoencoder,
    EncoderOutput,
    decode,
    encode,
    encode_with_moments,
    kl_penalty,
)
from .training import (
    AELossBreakdown,
    AEOptState,
    AETrainResult,
    ae_train_step,
    encode_dataset,
    load_ae_checkpoint,
    run_ae_training,
    save_ae_checkpoint,
)

__all__ = [
    "AELossBreakdown",
    "AEOptState",
    "AETrainResult",
    "Autoencoder",
    "EncoderOutput",
    "ae_train_step",
    "decode",
    "encode",
    "encode_dataset",
    "encode_with_moments",
    "kl_penalty",
    "load_ae_checkpoint",
    "run_ae_training",
    "save_ae_checkpoint",
]
