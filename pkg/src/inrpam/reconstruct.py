"""Self-supervised reconstruction: fit a hash-encoded coordinate network
through a learnable Gaussian blur and stride decimation to a sparse,
blurred observation.

Per epoch the dense raster prediction ``S`` is blurred by the current PSF,
decimated, and compared with the observation under a summed L2 loss plus a
weighted smoothed total-variation penalty on ``S``. Gradients flow to the
hash tables, the MLP and ``log_sigma``; all parameters are updated with Adam
on a step-decay learning-rate schedule.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ConfigError, CoordGrid, DataError, DimensionError, ImageGrid, PsfKernel
from .forward import BOUNDARIES, downsampled_shape, shift_operator
from .hashenc import (
    HashEncoderParams,
    HashLookup,
    build_lookup,
    encode_lookup,
    encode_lookup_backward,
    growth_factor_for,
    init_encoder,
)
from .mlp import MlpParams, init_mlp, mlp_backward_batch, mlp_forward_batch
from .psf import gaussian_psf, gaussian_weights

TV_DELTA = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    lr0: float = 1e-3
    lr_decay: float = 0.5
    decay_every: int = 500
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    tv_weight_eps: float = 1e-5
    stride: int = 2
    psf_init_sigma: float = 2.0
    psf_kernel_size: int = 21
    learn_psf: bool = True
    rng_seed: int = 0
    boundary: str = "reflect"
    hash_levels: int = 8
    hash_features: int = 2
    hash_table_size: int = 2**16
    hash_base_resolution: int = 16
    # finest hash level; 0 means "match the dense raster"
    hash_finest_resolution: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr0 > 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.decay_every < 1:
            raise ConfigError(f"decay_every must be >= 1, got {self.decay_every}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if not self.adam_eps > 0:
            raise ConfigError("adam_eps must be positive")
        if not self.tv_weight_eps >= 0:
            raise ConfigError(f"tv_weight_eps must be >= 0, got {self.tv_weight_eps}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if not self.psf_init_sigma > 0:
            raise ConfigError(f"psf_init_sigma must be positive, got {self.psf_init_sigma}")
        if self.psf_kernel_size < 1 or self.psf_kernel_size % 2 == 0:
            raise ConfigError(f"psf_kernel_size must be odd, got {self.psf_kernel_size}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}")

    def learning_rate(self, epoch: int) -> float:
        return self.lr0 * self.lr_decay ** (epoch // self.decay_every)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LearnablePsf:
    """Gaussian PSF parameterized by ``log_sigma`` (sigma in pixels)."""

    log_sigma: float
    kernel_size: int

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    def kernel(self) -> PsfKernel:
        return gaussian_psf(self.sigma, self.kernel_size)

    def taps(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalized 1-D taps ``g`` and ``dg / dlog_sigma``; the kernel is ``outer(g, g)``."""
        half = self.kernel_size // 2
        d = np.arange(-half, half + 1, dtype=np.float64)
        s = self.sigma
        w = np.exp(-(d * d) / (2 * s * s))
        dw = w * (d * d) / (s * s)
        total = w.sum()
        g = w / total
        dg = (dw - g * dw.sum()) / total
        return g, dg

    def kernel_grad(self) -> np.ndarray:
        """``d kernel / d log_sigma`` from the 2-D formula, quotient rule included."""
        s = self.sigma
        w = gaussian_weights(s, self.kernel_size)
        half = self.kernel_size // 2
        d = np.arange(-half, half + 1, dtype=np.float64)
        r2 = d[:, None] ** 2 + d[None, :] ** 2
        dw = w * r2 / (s * s)
        total = w.sum()
        return (dw - (w / total) * dw.sum()) / total


@dataclass(eq=False)
class TrainState:
    encoder: HashEncoderParams
    mlp: MlpParams
    psf: LearnablePsf
    moments: dict = field(default_factory=dict)
    epoch: int = 0
    history: list = field(default_factory=list)

    def parameters(self) -> dict[str, np.ndarray]:
        """Live references to every trainable array (log_sigma is wrapped)."""
        params = {"tables": self.encoder.tables}
        params.update(self.mlp.arrays())
        params["log_sigma"] = np.array([self.psf.log_sigma])
        return params

    def copy(self) -> "TrainState":
        return TrainState(
            self.encoder.copy(),
            self.mlp.copy(),
            LearnablePsf(self.psf.log_sigma, self.psf.kernel_size),
            {k: (m.copy(), v.copy()) for k, (m, v) in self.moments.items()},
            self.epoch,
            list(self.history),
        )


def init_state(cfg: TrainConfig, dense_dims: tuple[int, int]) -> TrainState:
    """Fresh parameters for a ``(width, height)`` dense raster."""
    finest = cfg.hash_finest_resolution or max(dense_dims)
    seeds = np.random.SeedSequence(cfg.rng_seed).generate_state(2)
    encoder = init_encoder(
        cfg.hash_levels,
        cfg.hash_features,
        cfg.hash_table_size,
        cfg.hash_base_resolution,
        growth_factor_for(cfg.hash_base_resolution, finest, cfg.hash_levels),
        rng_seed=int(seeds[0]),
    )
    mlp = init_mlp(encoder.out_dim, rng_seed=int(seeds[1]))
    psf = LearnablePsf(math.log(cfg.psf_init_sigma), cfg.psf_kernel_size)
    return TrainState(encoder, mlp, psf)


class _Raster:
    """Cached hash lookup for one dense raster."""

    def __init__(self, encoder: HashEncoderParams, dims: tuple[int, int]):
        self.dims = dims
        self.lookup: HashLookup = build_lookup(encoder, CoordGrid(*dims).coords())
        # rows the raster can ever reach, per level
        self.touched = [np.unique(self.lookup.rows[:, level]) for level in range(encoder.levels)]


_RASTER_CACHE: dict = {}


def _raster(encoder: HashEncoderParams, dims: tuple[int, int]) -> _Raster:
    key = (tuple(sorted(encoder.config().items())), dims)
    raster = _RASTER_CACHE.get(key)
    if raster is None:
        if len(_RASTER_CACHE) > 8:
            _RASTER_CACHE.clear()
        raster = _RASTER_CACHE[key] = _Raster(encoder, dims)
    return raster


def _check_dims(state: TrainState, dims: tuple[int, int]):
    width, height = dims
    if min(width, height) < state.psf.kernel_size:
        raise DimensionError(
            f"dense dims {width}x{height} smaller than PSF kernel size {state.psf.kernel_size}"
        )


def _predict(state: TrainState, dims):
    raster = _raster(state.encoder, dims)
    features = encode_lookup(state.encoder, raster.lookup)
    values, cache = mlp_forward_batch(state.mlp, features)
    width, height = dims
    return values.reshape(height, width), cache, raster


def predict_dense(state: TrainState, dims: tuple[int, int]) -> ImageGrid:
    """Network prediction at every pixel center of a ``(width, height)`` raster."""
    _check_dims(state, dims)
    values, _, _ = _predict(state, tuple(dims))
    return ImageGrid(values)


def total_variation(img: np.ndarray, delta: float = TV_DELTA) -> tuple[float, np.ndarray]:
    """Smoothed isotropic TV with forward differences and its gradient.

    ``TV = sum(sqrt(dx^2 + dy^2 + delta^2) - delta)``; differences past the
    last row/column are zero, so a constant image has TV exactly 0.
    """
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[:, :-1] = img[:, 1:] - img[:, :-1]
    dy[:-1, :] = img[1:, :] - img[:-1, :]
    mag = np.sqrt(dx * dx + dy * dy + delta * delta)
    tv = float(np.sum(mag - delta))
    nx = dx / mag
    ny = dy / mag
    grad = -nx - ny
    grad[:, 1:] += nx[:, :-1]
    grad[1:, :] += ny[:-1, :]
    return tv, grad


@dataclass
class Gradients:
    tables: np.ndarray
    mlp: MlpParams
    log_sigma: float
    # per-level table rows the raster can reach; Adam skips the rest
    touched: list | None = field(default=None, repr=False)

    def as_dict(self) -> dict[str, np.ndarray]:
        out = {"tables": self.tables}
        out.update(self.mlp.arrays())
        out["log_sigma"] = np.array([self.log_sigma])
        return out


def loss_and_grads(state: TrainState, observed: ImageGrid, cfg: TrainConfig) -> tuple[float, Gradients]:
    """Summed L2 data term plus weighted TV, with gradients for every parameter."""
    stride = cfg.stride
    dims = (observed.width * stride, observed.height * stride)
    _check_dims(state, dims)
    width, height = dims
    if downsampled_shape((height, width), stride) != observed.shape:
        raise DimensionError("observed dims inconsistent with dense dims and stride")

    dense, cache, raster = _predict(state, dims)
    g, dg = state.psf.taps()
    # only the rows/columns that survive decimation are ever formed
    cy = shift_operator(g, height, cfg.boundary)[::stride]
    cx = shift_operator(g, width, cfg.boundary)[::stride]
    tmp = dense @ cx.T
    pred = cy @ tmp
    resid = pred - observed.data
    loss = float(np.sum(resid * resid))

    grad_pred = 2.0 * resid
    grad_dense = cy.T @ grad_pred @ cx

    dcy = shift_operator(dg, height, cfg.boundary)[::stride]
    dcx = shift_operator(dg, width, cfg.boundary)[::stride]
    dpred = dcy @ tmp + cy @ (dense @ dcx.T)
    grad_log_sigma = float(np.vdot(grad_pred, dpred))

    if cfg.tv_weight_eps > 0:
        tv, tv_grad = total_variation(dense)
        loss += cfg.tv_weight_eps * tv
        grad_dense = grad_dense + cfg.tv_weight_eps * tv_grad

    mlp_grads, grad_features = mlp_backward_batch(state.mlp, cache, grad_dense.ravel())
    table_grads = encode_lookup_backward(state.encoder, raster.lookup, grad_features)
    return loss, Gradients(table_grads, mlp_grads, grad_log_sigma, raster.touched)


def adam_step(state: TrainState, grads: Gradients, cfg: TrainConfig, epoch: int) -> TrainState:
    """One bias-corrected Adam update in place; returns ``state``."""
    lr = cfg.learning_rate(epoch)
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    t = epoch + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    params = state.parameters()
    grad_map = grads.as_dict()
    if not cfg.learn_psf:
        grad_map.pop("log_sigma")
    for name, grad in grad_map.items():
        param = params[name]
        if name not in state.moments:
            state.moments[name] = (np.zeros_like(param), np.zeros_like(param))
        m, v = state.moments[name]
        if name == "tables" and grads.touched is not None:
            # untouched rows have zero gradient forever, so their update is exactly zero
            for level, rows in enumerate(grads.touched):
                _adam_update(param[level], m[level], v[level], grad[level], rows, lr, b1, b2, c1, c2, cfg.adam_eps)
            continue
        m *= b1
        m += (1 - b1) * grad
        v *= b2
        v += (1 - b2) * grad * grad
        param -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
    if cfg.learn_psf:
        state.psf.log_sigma = float(params["log_sigma"][0])
    return state


def _adam_update(param, m, v, grad, rows, lr, b1, b2, c1, c2, eps):
    g = grad[rows]
    mr = b1 * m[rows] + (1 - b1) * g
    vr = b2 * v[rows] + (1 - b2) * g * g
    m[rows] = mr
    v[rows] = vr
    param[rows] -= lr * (mr / c1) / (np.sqrt(vr / c2) + eps)


@dataclass
class ReconstructionResult:
    dense: ImageGrid
    fitted_sigma: float
    history: list
    state: TrainState


def train(state: TrainState, observed: ImageGrid, cfg: TrainConfig, epochs: int | None = None, callback=None) -> TrainState:
    """Continue full-batch training of ``state`` for ``epochs`` (default: to ``cfg.epochs``)."""
    stop = cfg.epochs if epochs is None else state.epoch + epochs
    while state.epoch < stop:
        loss, grads = loss_and_grads(state, observed, cfg)
        adam_step(state, grads, cfg, state.epoch)
        state.history.append(loss)
        state.epoch += 1
        if callback is not None:
            callback(state, loss)
    return state


def reconstruct(observed: ImageGrid, cfg: TrainConfig = TrainConfig(), callback=None) -> ReconstructionResult:
    """Fit the network to ``observed`` and return the dense, deblurred estimate."""
    if not np.all(np.isfinite(observed.data)):
        raise DataError("observed image contains non-finite values")
    dims = (observed.width * cfg.stride, observed.height * cfg.stride)
    state = init_state(cfg, dims)
    _check_dims(state, dims)
    train(state, observed, cfg, callback=callback)
    return ReconstructionResult(predict_dense(state, dims), state.psf.sigma, list(state.history), state)
