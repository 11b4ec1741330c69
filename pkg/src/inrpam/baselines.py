"""Classical comparison arms: interpolation followed by (blind) Richardson-Lucy.

Interpolators place low-resolution sample ``i`` at dense pixel ``i * factor``,
the position stride decimation took it from, and replicate edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, DataError, ImageGrid, PsfKernel
from .forward import BOUNDARIES, correlate_adjoint_array, correlate_array, kernel_grad_array
from .psf import gaussian_psf, kernel_size_for_sigma

INTERPOLATORS = ("bilinear", "bicubic")


def _bilinear_matrix(n_in: int, factor: int) -> np.ndarray:
    n_out = n_in * factor
    pos = np.arange(n_out) / factor
    i0 = np.minimum(np.floor(pos).astype(np.int64), n_in - 1)
    t = pos - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - t)
    np.add.at(m, (rows, i1), t)
    return m


def _cubic_weight(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(x)
    near = ((a + 2) * x - (a + 3)) * x * x + 1
    far = ((a * x - 5 * a) * x + 8 * a) * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def _bicubic_matrix(n_in: int, factor: int) -> np.ndarray:
    n_out = n_in * factor
    pos = np.arange(n_out) / factor
    base = np.floor(pos).astype(np.int64)
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for offset in (-1, 0, 1, 2):
        idx = base + offset
        w = _cubic_weight(pos - idx)
        np.add.at(m, (rows, np.clip(idx, 0, n_in - 1)), w)
    return m


def _upsample(image: ImageGrid, factor: int, builder) -> ImageGrid:
    if factor < 1:
        raise ConfigError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return image
    my = builder(image.height, factor)
    mx = builder(image.width, factor)
    return ImageGrid(my @ image.data @ mx.T)


def upsample_bilinear(image: ImageGrid, factor: int) -> ImageGrid:
    return _upsample(image, factor, _bilinear_matrix)


def upsample_bicubic(image: ImageGrid, factor: int) -> ImageGrid:
    """Catmull-Rom (a = -0.5) cubic convolution interpolation."""
    return _upsample(image, factor, _bicubic_matrix)


def _rl_image_step(f, g, kernel_weights, boundary, floor):
    predicted = correlate_array(f, kernel_weights, boundary)
    ratio = g / np.maximum(predicted, floor)
    # exact adjoint of the blur; equals the flipped-kernel blur away from the border
    return f * correlate_adjoint_array(ratio, kernel_weights, boundary)


def _check_nonnegative(img: ImageGrid):
    if np.any(img.data < 0):
        raise DataError("Richardson-Lucy requires a nonnegative observation")


def richardson_lucy(
    observed: ImageGrid,
    kernel: PsfKernel,
    iterations: int,
    clamp_floor: float = 1e-12,
    boundary: str = "reflect",
    callback=None,
) -> ImageGrid:
    """Multiplicative RL iterations started from the observation itself.

    ``callback(k, estimate)`` sees the raw array after each iteration.
    """
    _check_nonnegative(observed)
    if iterations < 0:
        raise ConfigError("iterations must be >= 0")
    g = observed.data
    f = g.copy()
    for k in range(iterations):
        f = _rl_image_step(f, g, kernel.weights, boundary, clamp_floor)
        if callback is not None:
            callback(k, f)
    return ImageGrid(f)


@dataclass(frozen=True)
class BlindDeconvConfig:
    outer_iterations: int = 30
    inner_rl_steps_image: int = 5
    inner_rl_steps_psf: int = 5
    psf_init: PsfKernel = field(default_factory=lambda: gaussian_psf(2.0, kernel_size_for_sigma(2.0)))
    clamp_floor: float = 1e-12
    boundary: str = "reflect"

    def __post_init__(self):
        if self.outer_iterations < 1 or self.inner_rl_steps_image < 1:
            raise ConfigError("iteration counts must be >= 1")
        # zero PSF steps is allowed: it degenerates to plain RL
        if self.inner_rl_steps_psf < 0:
            raise ConfigError("inner_rl_steps_psf must be >= 0")
        if not self.clamp_floor > 0:
            raise ConfigError("clamp_floor must be positive")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}")


def _rl_psf_step(psf, f, g, boundary, floor):
    predicted = correlate_array(f, psf, boundary)
    ratio = g / np.maximum(predicted, floor)
    updated = psf * kernel_grad_array(ratio, f, psf.shape[0], boundary)
    updated = np.clip(updated, 0.0, None)
    total = updated.sum()
    return updated / total if total > 0 else psf


def blind_deconvolve(observed: ImageGrid, cfg: BlindDeconvConfig = BlindDeconvConfig(), callback=None):
    """Alternating RL on image and PSF under a flat prior.

    Returns ``(restored, estimated_psf)``. ``callback(outer, image, psf)`` is
    invoked after every outer iteration when given.
    """
    _check_nonnegative(observed)
    g = observed.data
    f = g.copy()
    psf = cfg.psf_init.weights.copy()
    for outer in range(cfg.outer_iterations):
        for _ in range(cfg.inner_rl_steps_image):
            f = _rl_image_step(f, g, psf, cfg.boundary, cfg.clamp_floor)
        for _ in range(cfg.inner_rl_steps_psf):
            psf = _rl_psf_step(psf, f, g, cfg.boundary, cfg.clamp_floor)
        if callback is not None:
            callback(outer, f, PsfKernel.normalized(psf))
    return ImageGrid(f), PsfKernel.normalized(psf)


def baseline_pipeline(
    observed_sparse: ImageGrid,
    stride: int,
    method: str = "bicubic",
    cfg: BlindDeconvConfig = BlindDeconvConfig(),
) -> ImageGrid:
    """Interpolate to the dense grid, then blind-deconvolve."""
    restored, _ = blind_deconvolve(interpolate(observed_sparse, stride, method), cfg)
    return restored


def interpolate(observed_sparse: ImageGrid, stride: int, method: str) -> ImageGrid:
    """Up-sample by ``stride``, clipped to be nonnegative for RL."""
    if method == "bilinear":
        dense = upsample_bilinear(observed_sparse, stride)
    elif method == "bicubic":
        dense = upsample_bicubic(observed_sparse, stride)
    else:
        raise ConfigError(f"method must be one of {INTERPOLATORS}, got {method!r}")
    # cubic overshoot can dip below zero
    return ImageGrid(np.clip(dense.data, 0.0, None))
