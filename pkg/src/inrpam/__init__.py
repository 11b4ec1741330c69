"""Implicit-neural-representation reconstruction of under-sampled, PSF-blurred
photoacoustic microscopy images, with the physical PSF model, classical
baselines, vascular phantoms and quality metrics used to evaluate it."""

__version__ = "0.1.0"

from .core import (
    ConfigError,
    CoordGrid,
    DataError,
    DimensionError,
    DomainError,
    ImageGrid,
    InrPamError,
    PsfKernel,
    coord_of_pixel,
    image_new,
)
from .reconstruct import TrainConfig, reconstruct

__all__ = [
    "ConfigError",
    "CoordGrid",
    "DataError",
    "DimensionError",
    "DomainError",
    "ImageGrid",
    "InrPamError",
    "PsfKernel",
    "TrainConfig",
    "coord_of_pixel",
    "image_new",
    "reconstruct",
]
