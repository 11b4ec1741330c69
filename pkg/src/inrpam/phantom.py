"""Random vascular phantoms and seeded degradation experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ImageGrid, PsfKernel
from .forward import DegradeConfig, degrade
from .psf import gaussian_psf, kernel_size_for_sigma

MIN_PHANTOM_DIM = 32


@dataclass(frozen=True)
class VesselPhantomConfig:
    dims: tuple[int, int] = (128, 128)
    n_trunks: int = 4
    branch_probability: float = 0.5
    min_width: float = 1.5
    max_width: float = 4.0
    intensity_range: tuple[float, float] = (0.6, 1.0)
    curvature_scale: float = 0.06
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.dims) < MIN_PHANTOM_DIM:
            raise ConfigError(f"phantom dims must be at least {MIN_PHANTOM_DIM}, got {self.dims}")
        if self.n_trunks < 0:
            raise ConfigError("n_trunks must be >= 0")
        if not 0 <= self.branch_probability <= 1:
            raise ConfigError("branch_probability must lie in [0, 1]")
        if not 0 < self.min_width <= self.max_width:
            raise ConfigError("need 0 < min_width <= max_width")
        low, high = self.intensity_range
        if not 0 <= low < high <= 1:
            raise ConfigError("intensity_range must satisfy 0 <= low < high <= 1")
        if self.curvature_scale < 0:
            raise ConfigError("curvature_scale must be >= 0")


@dataclass
class _Vessel:
    points: np.ndarray  # (n, 2) as (x, y) pixel coordinates
    widths: np.ndarray
    intensity: float


_STEP = 2.0
_SMOOTH = 5
_BRANCH_RATE = 0.04  # per control point, scaled by branch_probability
_MAX_DEPTH = 2


def _walk(rng, start, heading, width0, cfg: VesselPhantomConfig, max_steps: int):
    w, h = cfg.dims
    pts = [np.asarray(start, dtype=np.float64)]
    turn = 0.0
    for _ in range(max_steps):
        # smoothed curvature: heading drifts by a low-passed random turn rate
        turn = 0.6 * turn + rng.normal(0.0, cfg.curvature_scale)
        heading += turn
        nxt = pts[-1] + _STEP * np.array([math.cos(heading), math.sin(heading)])
        pts.append(nxt)
        if not (-4 <= nxt[0] <= w + 4 and -4 <= nxt[1] <= h + 4):
            break
    pts = np.array(pts)
    if len(pts) > _SMOOTH:
        kernel = np.ones(_SMOOTH) / _SMOOTH
        padded = np.pad(pts, ((_SMOOTH // 2, _SMOOTH // 2), (0, 0)), mode="edge")
        pts = np.stack([np.convolve(padded[:, k], kernel, mode="valid") for k in range(2)], axis=1)
    taper_end = max(cfg.min_width, 0.6 * width0)
    widths = np.linspace(width0, taper_end, len(pts))
    return pts, widths


def _grow(rng, cfg, start, heading, width0, intensity, depth, vessels, max_steps):
    pts, widths = _walk(rng, start, heading, width0, cfg, max_steps)
    vessels.append(_Vessel(pts, widths, intensity))
    if depth >= _MAX_DEPTH:
        return
    for k in range(3, len(pts) - 3):
        if rng.random() < cfg.branch_probability * _BRANCH_RATE:
            seg = pts[k + 1] - pts[k - 1]
            parent_heading = math.atan2(seg[1], seg[0])
            side = 1.0 if rng.random() < 0.5 else -1.0
            child_heading = parent_heading + side * rng.uniform(math.radians(25), math.radians(65))
            child_width = max(cfg.min_width, 0.7 * widths[k])
            child_intensity = float(np.clip(intensity * rng.uniform(0.8, 1.0), *cfg.intensity_range))
            _grow(rng, cfg, pts[k], child_heading, child_width, child_intensity, depth + 1, vessels, max_steps // 2)


def _render_segment(img, p0, p1, w0, w1, intensity):
    h, w = img.shape
    reach = max(w0, w1) / 2 + 1.0
    x_lo = max(int(math.floor(min(p0[0], p1[0]) - reach)), 0)
    x_hi = min(int(math.ceil(max(p0[0], p1[0]) + reach)), w - 1)
    y_lo = max(int(math.floor(min(p0[1], p1[1]) - reach)), 0)
    y_hi = min(int(math.ceil(max(p0[1], p1[1]) + reach)), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    xs = np.arange(x_lo, x_hi + 1) + 0.5
    ys = np.arange(y_lo, y_hi + 1) + 0.5
    px, py = np.meshgrid(xs, ys)
    d = p1 - p0
    length2 = float(d @ d)
    if length2 == 0.0:
        t = np.zeros_like(px)
    else:
        t = np.clip(((px - p0[0]) * d[0] + (py - p0[1]) * d[1]) / length2, 0.0, 1.0)
    dist = np.hypot(px - (p0[0] + t * d[0]), py - (p0[1] + t * d[1]))
    radius = (w0 + t * (w1 - w0)) / 2
    # one-pixel linear ramp at the tube edge approximates area coverage
    coverage = np.clip(radius - dist + 0.5, 0.0, 1.0)
    view = img[y_lo : y_hi + 1, x_lo : x_hi + 1]
    np.maximum(view, coverage * intensity, out=view)


def _border_start(rng, dims):
    w, h = dims
    side = rng.integers(4)
    if side == 0:
        start = (rng.uniform(0, w), 0.0)
    elif side == 1:
        start = (rng.uniform(0, w), float(h))
    elif side == 2:
        start = (0.0, rng.uniform(0, h))
    else:
        start = (float(w), rng.uniform(0, h))
    target = np.array([w / 2, h / 2]) + rng.normal(0, 0.2 * min(w, h), size=2)
    heading = math.atan2(target[1] - start[1], target[0] - start[0])
    return np.array(start), heading


def generate_vessels(cfg: VesselPhantomConfig = VesselPhantomConfig()) -> ImageGrid:
    """Render random branching, tapering vessels on a zero background."""
    w, h = cfg.dims
    rng = np.random.default_rng(cfg.rng_seed)
    img = np.zeros((h, w))
    max_steps = int(2 * (w + h) / _STEP)
    vessels: list[_Vessel] = []
    for _ in range(cfg.n_trunks):
        start, heading = _border_start(rng, cfg.dims)
        width0 = rng.uniform(0.7 * cfg.max_width, cfg.max_width)
        intensity = rng.uniform(*cfg.intensity_range)
        _grow(rng, cfg, start, heading, width0, intensity, 0, vessels, max_steps)
    for vessel in vessels:
        pts, widths = vessel.points, vessel.widths
        for k in range(len(pts) - 1):
            _render_segment(img, pts[k], pts[k + 1], widths[k], widths[k + 1], vessel.intensity)
    return ImageGrid(np.clip(img, 0.0, 1.0))


def make_experiment(
    gt: ImageGrid, sigma: float, stride: int, noise_sigma: float = 0.0, rng_seed: int = 0
) -> tuple[ImageGrid, PsfKernel]:
    """Blur ``gt`` with a Gaussian of width ``sigma``, decimate and add noise."""
    kernel = gaussian_psf(sigma, kernel_size_for_sigma(sigma))
    observed = degrade(gt, kernel, DegradeConfig(stride=stride, noise_sigma=noise_sigma), rng_seed)
    return observed, kernel
