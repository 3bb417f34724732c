"""Local implicit normalizing flow super-resolution (Python bindings)."""

from ._core import (
    ModelConfig,
    TrainConfig,
    Model,
    Trainer,
    procedural_corpus,
    bicubic_resample,
    bilinear_upsample,
    psnr,
    ssim,
    diversity,
    read_image,
    write_image,
    verify,
    Error,
    UsageError,
    ConfigError,
    DimensionError,
    TrainingError,
)

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "Model",
    "Trainer",
    "procedural_corpus",
    "bicubic_resample",
    "bilinear_upsample",
    "psnr",
    "ssim",
    "diversity",
    "read_image",
    "write_image",
    "verify",
    "Error",
    "UsageError",
    "ConfigError",
    "DimensionError",
    "TrainingError",
]
