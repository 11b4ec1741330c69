"""Two-hidden-layer ReLU perceptron with a sigmoid output, forward and backward by hand."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError

HIDDEN = 64


@dataclass(eq=False)
class MlpParams:
    w1: np.ndarray  # (in_dim, 64)
    b1: np.ndarray
    w2: np.ndarray  # (64, 64)
    b2: np.ndarray
    w3: np.ndarray  # (64, 1)
    b3: np.ndarray  # (1,)

    NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")

    def __post_init__(self):
        in_dim = self.w1.shape[0]
        expected = {
            "w1": (in_dim, HIDDEN),
            "b1": (HIDDEN,),
            "w2": (HIDDEN, HIDDEN),
            "b2": (HIDDEN,),
            "w3": (HIDDEN, 1),
            "b3": (1,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} must have shape {shape}, got {getattr(self, name).shape}")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.NAMES}

    def copy(self) -> "MlpParams":
        return MlpParams(**{k: v.copy() for k, v in self.arrays().items()})

    @classmethod
    def zeros(cls, in_dim: int) -> "MlpParams":
        return cls(
            np.zeros((in_dim, HIDDEN)),
            np.zeros(HIDDEN),
            np.zeros((HIDDEN, HIDDEN)),
            np.zeros(HIDDEN),
            np.zeros((HIDDEN, 1)),
            np.zeros(1),
        )


@dataclass
class MlpCache:
    features: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    out: np.ndarray


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_mlp(in_dim: int, rng_seed: int = 0) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    if in_dim < 1:
        raise DimensionError(f"in_dim must be >= 1, got {in_dim}")
    rng = np.random.default_rng(rng_seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return MlpParams(
        glorot(in_dim, HIDDEN),
        np.zeros(HIDDEN),
        glorot(HIDDEN, HIDDEN),
        np.zeros(HIDDEN),
        glorot(HIDDEN, 1),
        np.zeros(1),
    )


def mlp_forward_batch(params: MlpParams, features: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    """Evaluate a batch ``(n, in_dim)``; returns intensities ``(n,)`` and the cache."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.in_dim:
        raise DimensionError(f"features must have shape (n, {params.in_dim}), got {features.shape}")
    z1 = features @ params.w1 + params.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.w2 + params.b2
    h2 = np.maximum(z2, 0.0)
    out = sigmoid((h2 @ params.w3)[:, 0] + params.b3[0])
    return out, MlpCache(features, z1, h1, z2, h2, out)


def mlp_backward_batch(params: MlpParams, cache: MlpCache, grad_out: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Reverse-mode gradients summed over the batch, plus per-row feature gradients."""
    grad_out = np.asarray(grad_out, dtype=np.float64).reshape(-1)
    dz3 = grad_out * cache.out * (1.0 - cache.out)
    gw3 = cache.h2.T @ dz3[:, None]
    gb3 = np.array([dz3.sum()])
    dh2 = dz3[:, None] * params.w3[:, 0][None, :]
    dz2 = dh2 * (cache.z2 > 0)
    gw2 = cache.h1.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ params.w2.T
    dz1 = dh1 * (cache.z1 > 0)
    gw1 = cache.features.T @ dz1
    gb1 = dz1.sum(axis=0)
    grad_features = dz1 @ params.w1.T
    return MlpParams(gw1, gb1, gw2, gb2, gw3, gb3), grad_features


def mlp_forward(params: MlpParams, feature) -> tuple[float, MlpCache]:
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != (params.in_dim,):
        raise DimensionError(f"feature must have length {params.in_dim}, got shape {feature.shape}")
    out, cache = mlp_forward_batch(params, feature[None, :])
    return float(out[0]), cache


def mlp_backward(params: MlpParams, cache: MlpCache, grad_out: float) -> tuple[MlpParams, np.ndarray]:
    grads, grad_features = mlp_backward_batch(params, cache, np.array([grad_out]))
    return grads, grad_features[0]
