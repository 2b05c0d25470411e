"""Tile coding: continuous points to sparse, unit-norm binary-pattern features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import SparseVec

__all__ = ["TileCoder"]


@dataclass(frozen=True, eq=False)
class TileCoder:
    """``n_grids`` offset grids of ``tiles_per_dim`` tiles along each of ``n_dims`` axes.

    Every point activates one tile per grid, each with value ``1/sqrt(n_grids)``.
    Offsets are in normalized units (the box scaled to ``[0, 1]``).
    """

    n_dims: int
    tiles_per_dim: int
    n_grids: int
    offsets: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        off = np.array(self.offsets, dtype=np.float64)
        bnd = np.array(self.bounds, dtype=np.float64)
        if min(self.n_dims, self.tiles_per_dim, self.n_grids) < 1:
            raise ValueError("n_dims, tiles_per_dim and n_grids must be positive")
        if off.shape != (self.n_grids, self.n_dims):
            raise ValueError(f"offsets must have shape ({self.n_grids}, {self.n_dims})")
        if np.any(off < 0) or np.any(off >= 1.0 / self.tiles_per_dim):
            raise ValueError("offsets must lie in [0, 1/tiles_per_dim)")
        if bnd.shape != (self.n_dims, 2) or np.any(bnd[:, 1] <= bnd[:, 0]):
            raise ValueError("bounds must be (n_dims, 2) with low < high")
        off.setflags(write=False)
        bnd.setflags(write=False)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "bounds", bnd)

    @classmethod
    def random(cls, n_dims, tiles_per_dim, n_grids, bounds=None, seed=0):
        rng = np.random.default_rng(seed)
        offsets = rng.uniform(0.0, 1.0 / tiles_per_dim, size=(n_grids, n_dims))
        if bounds is None:
            bounds = np.tile([0.0, 1.0], (n_dims, 1))
        return cls(n_dims, tiles_per_dim, n_grids, offsets, bounds)

    @property
    def dim(self):
        return self.n_grids * self.tiles_per_dim**self.n_dims

    def active(self, points) -> np.ndarray:
        """Active tile indices, shape ``(n_points, n_grids)``, increasing along each row."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.n_dims:
            raise ValueError(f"points must have shape (N, {self.n_dims})")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        u = np.clip((pts - lo) / (hi - lo), 0.0, 1.0)
        T = self.tiles_per_dim
        cells = np.floor((u[:, None, :] + self.offsets[None, :, :]) * T).astype(np.int64)
        np.clip(cells, 0, T - 1, out=cells)
        radix = T ** np.arange(self.n_dims, dtype=np.int64)
        grid_base = np.arange(self.n_grids, dtype=np.int64) * T**self.n_dims
        return grid_base[None, :] + cells @ radix

    def encode(self, point) -> SparseVec:
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (self.n_dims,):
            raise ValueError(f"point must have shape ({self.n_dims},), got {point.shape}")
        idx = self.active(point[None, :])[0]
        return SparseVec(self.dim, idx, np.full(self.n_grids, 1.0 / np.sqrt(self.n_grids)))

    def encode_many(self, points):
        """CSR matrix with one encoded row per point."""
        idx = self.active(points)
        n = idx.shape[0]
        data = np.full(idx.size, 1.0 / np.sqrt(self.n_grids))
        indptr = np.arange(n + 1, dtype=np.int64) * self.n_grids
        return sp.csr_matrix((data, idx.reshape(-1), indptr), shape=(n, self.dim))
