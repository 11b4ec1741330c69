"""Shared image and kernel containers plus the error hierarchy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InrPamError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(InrPamError, ValueError):
    """Shapes or sizes are inconsistent."""


class DomainError(InrPamError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(InrPamError, ValueError):
    """A configuration object is invalid."""


class DataError(InrPamError, ValueError):
    """Input data is non-finite or otherwise unusable."""


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Row-major 2-D grid of real intensities.

    ``data`` has shape ``(height, width)``; pixel ``(i, j)`` is column ``i``,
    row ``j``. The array is copied and made read-only on construction.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"image data must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("image contains non-finite values")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        """Row-major flattened copy, length ``width * height``."""
        return self.data.ravel().copy()

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> "ImageGrid":
        values = np.asarray(values, dtype=np.float64)
        if values.size != width * height:
            raise DimensionError(f"expected {width * height} values, got {values.size}")
        return cls(values.reshape(height, width))

    def __eq__(self, other):
        if not isinstance(other, ImageGrid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"ImageGrid(width={self.width}, height={self.height})"


def image_new(width: int, height: int, fill: float = 0.0) -> ImageGrid:
    if width < 1 or height < 1:
        raise DimensionError(f"image dimensions must be positive, got {width}x{height}")
    if not np.isfinite(fill):
        raise DataError("fill value must be finite")
    return ImageGrid(np.full((height, width), float(fill)))


@dataclass(frozen=True)
class CoordGrid:
    """Pixel-center normalized coordinates for a ``width x height`` raster."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionError(f"grid dimensions must be positive, got {self.width}x{self.height}")

    def coords(self) -> np.ndarray:
        """All pixel-center coordinates as an ``(height*width, 2)`` array, row-major."""
        xs = (np.arange(self.width) + 0.5) / self.width
        ys = (np.arange(self.height) + 0.5) / self.height
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


def coord_of_pixel(i: int, j: int, grid: CoordGrid) -> tuple[float, float]:
    if not (0 <= i < grid.width and 0 <= j < grid.height):
        raise IndexError(f"pixel ({i}, {j}) outside {grid.width}x{grid.height} grid")
    return ((i + 0.5) / grid.width, (j + 0.5) / grid.height)


@dataclass(frozen=True, eq=False)
class PsfKernel:
    """Odd-sized, nonnegative, unit-sum square convolution kernel."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"kernel must be square, got shape {w.shape}")
        if w.shape[0] % 2 == 0:
            raise DimensionError(f"kernel size must be odd, got {w.shape[0]}")
        if not np.all(np.isfinite(w)):
            raise DataError("kernel contains non-finite values")
        if np.any(w < 0):
            raise DomainError("kernel weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise DomainError(f"kernel must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def normalized(cls, weights) -> "PsfKernel":
        """Clamp negatives to zero and rescale to unit sum."""
        w = np.clip(np.asarray(weights, dtype=np.float64), 0.0, None)
        total = w.sum()
        if total <= 0:
            raise DomainError("kernel has no positive mass")
        return cls(w / total)

    @classmethod
    def delta(cls, size: int = 1) -> "PsfKernel":
        w = np.zeros((size, size))
        w[size // 2, size // 2] = 1.0
        return cls(w)

    def __eq__(self, other):
        if not isinstance(other, PsfKernel):
            return NotImplemented
        return bool(np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return f"PsfKernel(size={self.size})"
