"""Degradation operators: PSF convolution, stride decimation, and their adjoints.

Convolution is correlation-style, ``out[y, x] = sum_ab k[a, b] img[y + a - h, x + b - h]``,
with out-of-range samples resolved per axis by the boundary rule. Low-rank
kernels (a sampled Gaussian is rank one) are applied as banded matrix
products per separable term; full-rank kernels by shifted-slice summation on
a padded copy. Both paths have a fixed summation order and exact adjoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ConfigError, DimensionError, ImageGrid, PsfKernel

BOUNDARIES = ("reflect", "zero")


@dataclass(frozen=True)
class DegradeConfig:
    stride: int = 1
    boundary: str = "reflect"
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def _check_boundary(boundary: str):
    if boundary not in BOUNDARIES:
        raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


@lru_cache(maxsize=256)
def _source_index(n: int, half: int, boundary: str) -> np.ndarray:
    """For padded positions -half..n+half-1, the source index or -1 for zero."""
    t = np.arange(-half, n + half)
    if boundary == "reflect":
        # half-sample symmetric: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
        t = np.where(t < 0, -t - 1, t)
        t = np.where(t >= n, 2 * n - t - 1, t)
        return t
    return np.where((t < 0) | (t >= n), -1, t)


def shift_operator(taps: np.ndarray, n: int, boundary: str) -> np.ndarray:
    """Dense ``n x n`` matrix ``C`` with ``(C x)[i] = sum_t taps[t] x[src(i + t - h)]``."""
    size = taps.shape[0]
    half = size // 2
    src = _source_index(n, half, boundary)
    # rows: output index i, cols: src[i + t]
    i = np.repeat(np.arange(n), size)
    t = np.tile(np.arange(size), n)
    cols = src[i + t]
    vals = np.tile(taps, n)
    keep = cols >= 0
    flat = i[keep] * n + cols[keep]
    return np.bincount(flat, weights=vals[keep], minlength=n * n).reshape(n, n)


def separable_terms(weights: np.ndarray, tol: float = 1e-15) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rank-one factors ``(u, v)`` with ``weights = sum u v^T``."""
    u, s, vt = np.linalg.svd(weights)
    keep = s > tol * max(s[0], 1e-300)
    return [(u[:, r] * s[r], vt[r]) for r in np.flatnonzero(keep)]


def _check_fit(shape, size):
    if size > min(shape):
        raise DimensionError(f"kernel of size {size} does not fit image of shape {shape}")


@lru_cache(maxsize=256)
def _pad_operator(n: int, half: int, boundary: str) -> np.ndarray:
    """One-hot ``(n + 2 half) x n`` matrix realizing the boundary padding."""
    src = _source_index(n, half, boundary)
    op = np.zeros((src.size, n))
    keep = src >= 0
    op[np.flatnonzero(keep), src[keep]] = 1.0
    op.flags.writeable = False
    return op


def pad_array(img: np.ndarray, half: int, boundary: str = "reflect") -> np.ndarray:
    """Pad by ``half`` pixels on each side under the boundary rule."""
    h, w = img.shape
    ext = np.zeros((h + 1, w + 1))
    ext[:h, :w] = img
    rows = _source_index(h, half, boundary)
    cols = _source_index(w, half, boundary)
    # -1 indexes the trailing zero row/column of ext
    return ext[np.ix_(rows, cols)]


def unpad_adjoint(padded_grad: np.ndarray, shape: tuple[int, int], half: int, boundary: str = "reflect") -> np.ndarray:
    """Adjoint of :func:`pad_array`: fold the padded margins back onto their sources."""
    h, w = shape
    return _pad_operator(h, half, boundary).T @ padded_grad @ _pad_operator(w, half, boundary)


def _use_separable(terms, size) -> bool:
    # each rank-one term costs two dense products; direct summation costs size^2 slice adds
    return len(terms) <= 2 or size <= 3


def correlate_array(img: np.ndarray, weights: np.ndarray, boundary: str = "reflect") -> np.ndarray:
    """Array-level correlation; see :func:`convolve`."""
    _check_boundary(boundary)
    size = weights.shape[0]
    _check_fit(img.shape, size)
    h, w = img.shape
    out = np.zeros((h, w))
    terms = separable_terms(weights)
    if _use_separable(terms, size):
        for col_taps, row_taps in terms:
            out += shift_operator(col_taps, h, boundary) @ img @ shift_operator(row_taps, w, boundary).T
        return out
    padded = pad_array(img, size // 2, boundary)
    for a in range(size):
        for b in range(size):
            if weights[a, b] != 0.0:
                out += weights[a, b] * padded[a : a + h, b : b + w]
    return out


def correlate_adjoint_array(grad: np.ndarray, weights: np.ndarray, boundary: str = "reflect") -> np.ndarray:
    """Adjoint of :func:`correlate_array` with respect to the image."""
    _check_boundary(boundary)
    size = weights.shape[0]
    _check_fit(grad.shape, size)
    h, w = grad.shape
    terms = separable_terms(weights)
    if _use_separable(terms, size):
        out = np.zeros((h, w))
        for col_taps, row_taps in terms:
            out += shift_operator(col_taps, h, boundary).T @ grad @ shift_operator(row_taps, w, boundary)
        return out
    half = size // 2
    padded = np.zeros((h + 2 * half, w + 2 * half))
    for a in range(size):
        for b in range(size):
            if weights[a, b] != 0.0:
                padded[a : a + h, b : b + w] += weights[a, b] * grad
    return unpad_adjoint(padded, (h, w), half, boundary)


def kernel_grad_array(grad: np.ndarray, img: np.ndarray, size: int, boundary: str = "reflect") -> np.ndarray:
    """``g[a, b] = sum_p grad[p] * padded(img)[p + (a, b)]``."""
    _check_fit(img.shape, size)
    h, w = img.shape
    padded = pad_array(img, size // 2, boundary)
    out = np.empty((size, size))
    for a in range(size):
        band = padded[a : a + h]
        for b in range(size):
            out[a, b] = np.vdot(grad, band[:, b : b + w])
    return out


def convolve(image: ImageGrid, kernel: PsfKernel, boundary: str = "reflect") -> ImageGrid:
    """Same-size blur of ``image`` by ``kernel``."""
    return ImageGrid(correlate_array(image.data, kernel.weights, boundary))


def convolve_backward(grad_out: ImageGrid, image: ImageGrid, kernel: PsfKernel, boundary: str = "reflect"):
    """Exact adjoints of :func:`convolve` in the image and in the kernel weights.

    Returns ``(grad_image, grad_kernel)``; ``grad_kernel`` is a plain
    ``size x size`` array since it need not be a valid kernel.
    """
    if grad_out.shape != image.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} != image shape {image.shape}")
    grad_image = correlate_adjoint_array(grad_out.data, kernel.weights, boundary)
    grad_kernel = kernel_grad_array(grad_out.data, image.data, kernel.size, boundary)
    return ImageGrid(grad_image), grad_kernel


def downsampled_shape(shape: tuple[int, int], stride: int) -> tuple[int, int]:
    return (-(-shape[0] // stride), -(-shape[1] // stride))


def downsample(image: ImageGrid, stride: int) -> ImageGrid:
    """Keep every ``stride``-th pixel per axis, anchored at pixel (0, 0)."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    return ImageGrid(image.data[::stride, ::stride])


def scatter_array(grad: np.ndarray, full_shape: tuple[int, int], stride: int) -> np.ndarray:
    if grad.shape != downsampled_shape(full_shape, stride):
        raise DimensionError(
            f"grad shape {grad.shape} inconsistent with full shape {full_shape} at stride {stride}"
        )
    out = np.zeros(full_shape)
    out[::stride, ::stride] = grad
    return out


def downsample_backward(grad_out: ImageGrid, full_dims: tuple[int, int], stride: int) -> ImageGrid:
    """Zero-filled scatter of ``grad_out`` onto the sampled positions.

    ``full_dims`` is ``(width, height)``.
    """
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    width, height = full_dims
    return ImageGrid(scatter_array(grad_out.data, (height, width), stride))


def degrade(image: ImageGrid, kernel: PsfKernel, cfg: DegradeConfig, rng_seed: int = 0) -> ImageGrid:
    """Blur, decimate, then add seeded Gaussian noise. Data synthesis only."""
    blurred = correlate_array(image.data, kernel.weights, cfg.boundary)
    sparse = blurred[:: cfg.stride, :: cfg.stride]
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        sparse = sparse + rng.normal(0.0, cfg.noise_sigma, size=sparse.shape)
    return ImageGrid(sparse)
