"""Multiresolution hash encoding of 2-D coordinates.

Each level scales the coordinate by its grid resolution, hashes the four
corners of the enclosing cell into a trainable table and bilinearly blends
the corner rows. The encoding is linear in the tables, so the backward pass
is a weighted scatter of the incoming gradient onto at most four rows per level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, DimensionError, DomainError

PRIME_X = np.uint64(1)
PRIME_Y = np.uint64(2654435761)


def growth_factor_for(base_resolution: int, finest_resolution: int, levels: int) -> float:
    """Per-level growth so that the finest level reaches ``finest_resolution``."""
    if levels == 1 or finest_resolution <= base_resolution:
        return 1.0
    return math.exp(math.log(finest_resolution / base_resolution) / (levels - 1))


@dataclass(eq=False)
class HashEncoderParams:
    levels: int = 8
    features_per_level: int = 2
    table_size: int = 2**16
    base_resolution: int = 16
    growth_factor: float = 2.0
    tables: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if self.features_per_level < 1:
            raise ConfigError(f"features_per_level must be >= 1, got {self.features_per_level}")
        if self.table_size < 1 or self.table_size & (self.table_size - 1):
            raise ConfigError(f"table_size must be a power of two, got {self.table_size}")
        if self.base_resolution < 1:
            raise ConfigError(f"base_resolution must be >= 1, got {self.base_resolution}")
        if not self.growth_factor >= 1.0:
            raise ConfigError(f"growth_factor must be >= 1, got {self.growth_factor}")
        shape = (self.levels, self.table_size, self.features_per_level)
        if self.tables is None:
            self.tables = np.zeros(shape)
        elif self.tables.shape != shape:
            raise DimensionError(f"tables must have shape {shape}, got {self.tables.shape}")

    @property
    def out_dim(self) -> int:
        return self.levels * self.features_per_level

    def resolutions(self) -> np.ndarray:
        # small slack keeps exact powers (e.g. 16 * 2**3) from flooring down
        scale = self.base_resolution * self.growth_factor ** np.arange(self.levels)
        return np.floor(scale + 1e-9).astype(np.int64)

    def config(self) -> dict:
        return {
            "levels": self.levels,
            "features_per_level": self.features_per_level,
            "table_size": self.table_size,
            "base_resolution": self.base_resolution,
            "growth_factor": self.growth_factor,
        }

    def copy(self) -> "HashEncoderParams":
        return HashEncoderParams(**self.config(), tables=self.tables.copy())


def init_encoder(
    levels: int = 8,
    features_per_level: int = 2,
    table_size: int = 2**16,
    base_resolution: int = 16,
    growth_factor: float = 2.0,
    rng_seed: int = 0,
) -> HashEncoderParams:
    """Tables drawn uniformly from [-1e-4, 1e-4]."""
    params = HashEncoderParams(levels, features_per_level, table_size, base_resolution, growth_factor)
    rng = np.random.default_rng(rng_seed)
    params.tables = rng.uniform(-1e-4, 1e-4, size=params.tables.shape)
    return params


def spatial_hash(ix: np.ndarray, iy: np.ndarray, table_size: int) -> np.ndarray:
    h = (ix.astype(np.uint64) * PRIME_X) ^ (iy.astype(np.uint64) * PRIME_Y)
    return (h % np.uint64(table_size)).astype(np.int64)


@dataclass(frozen=True)
class HashLookup:
    """Precomputed table rows and bilinear weights for a fixed set of coordinates.

    ``rows`` and ``weights`` have shape ``(n_coords, levels, 4)``.
    """

    rows: np.ndarray
    weights: np.ndarray

    @property
    def n_coords(self) -> int:
        return self.rows.shape[0]


def build_lookup(params: HashEncoderParams, coords: np.ndarray) -> HashLookup:
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if np.any(~np.isfinite(coords)) or np.any(coords < 0) or np.any(coords > 1):
        raise DomainError("coordinates must lie in [0, 1]^2")
    n = coords.shape[0]
    rows = np.empty((n, params.levels, 4), dtype=np.int64)
    weights = np.empty((n, params.levels, 4))
    for level, res in enumerate(params.resolutions()):
        pos = coords * res
        cell = np.floor(pos)
        frac = pos - cell
        x0 = cell[:, 0].astype(np.int64)
        y0 = cell[:, 1].astype(np.int64)
        fx, fy = frac[:, 0], frac[:, 1]
        corners = ((0, 0), (1, 0), (0, 1), (1, 1))
        for k, (dx, dy) in enumerate(corners):
            rows[:, level, k] = spatial_hash(x0 + dx, y0 + dy, params.table_size)
            wx = fx if dx else 1.0 - fx
            wy = fy if dy else 1.0 - fy
            weights[:, level, k] = wx * wy
    return HashLookup(rows, weights)


def encode_lookup(params: HashEncoderParams, lookup: HashLookup) -> np.ndarray:
    """Features of every coordinate in ``lookup``, shape ``(n, levels * F)``."""
    n = lookup.n_coords
    out = np.empty((n, params.levels, params.features_per_level))
    for level in range(params.levels):
        gathered = params.tables[level][lookup.rows[:, level]]  # (n, 4, F)
        out[:, level] = np.einsum("nk,nkf->nf", lookup.weights[:, level], gathered)
    return out.reshape(n, -1)


def encode_lookup_backward(params: HashEncoderParams, lookup: HashLookup, grad_features: np.ndarray) -> np.ndarray:
    """Dense table gradient, accumulated in fixed coordinate order."""
    n = lookup.n_coords
    g = np.asarray(grad_features, dtype=np.float64).reshape(n, params.levels, params.features_per_level)
    T, F = params.table_size, params.features_per_level
    out = np.zeros_like(params.tables)
    for level in range(params.levels):
        rows = lookup.rows[:, level].ravel()
        w = lookup.weights[:, level].ravel()
        contrib = w[:, None] * np.repeat(g[:, level], 4, axis=0)  # (n*4, F)
        for f in range(F):
            out[level, :, f] = np.bincount(rows, weights=contrib[:, f], minlength=T)
    return out


def encode(params: HashEncoderParams, coord) -> np.ndarray:
    """Feature vector of length ``levels * features_per_level`` for one coordinate."""
    return encode_lookup(params, build_lookup(params, np.asarray(coord, dtype=np.float64)))[0]


def encode_backward(params: HashEncoderParams, coord, grad_feature) -> dict[tuple[int, int], np.ndarray]:
    """Sparse table gradient ``{(level, row): grad_row}`` for one coordinate.

    Rows hit by several corners (hash collisions) are summed. Zero
    contributions are dropped, so a zero ``grad_feature`` yields ``{}``.
    """
    grad_feature = np.asarray(grad_feature, dtype=np.float64)
    if grad_feature.shape != (params.out_dim,):
        raise DimensionError(f"grad_feature must have length {params.out_dim}")
    lookup = build_lookup(params, np.asarray(coord, dtype=np.float64))
    g = grad_feature.reshape(params.levels, params.features_per_level)
    grads: dict[tuple[int, int], np.ndarray] = {}
    for level in range(params.levels):
        for k in range(4):
            w = lookup.weights[0, level, k]
            if w == 0.0 or not np.any(g[level]):
                continue
            key = (level, int(lookup.rows[0, level, k]))
            grads[key] = grads.get(key, 0.0) + w * g[level]
    return grads
