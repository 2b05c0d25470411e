"""Lazily generated Gaussian random projections and the sparse inner-product bias bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._rng import gaussian_rows, stream_key
from .linalg import SparseVec

__all__ = [
    "ProjectionMatrix",
    "BiasBound",
    "project",
    "project_rows",
    "eps_prj",
    "dim_for_eps",
]


@dataclass(frozen=True)
class ProjectionMatrix:
    """A ``big_dim x small_dim`` matrix with i.i.d. N(0, 1/small_dim) entries.

    The matrix is never stored. Row ``i`` is regenerated on demand from
    ``(seed, i)``, so it costs O(small_dim) no matter how large ``big_dim`` is.
    """

    big_dim: int
    small_dim: int
    seed: int

    def __post_init__(self):
        if self.small_dim < 1:
            raise ValueError(f"small_dim must be >= 1, got {self.small_dim}")
        if self.big_dim < self.small_dim:
            raise ValueError(f"big_dim {self.big_dim} < small_dim {self.small_dim}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def rows(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        if indices.size and (indices.min() < 0 or indices.max() >= self.big_dim):
            raise ValueError("row index out of range")
        return gaussian_rows(
            stream_key(self.seed), indices, self.small_dim, 1.0 / math.sqrt(self.small_dim)
        )

    def row(self, i) -> np.ndarray:
        return self.rows([i])[0]

    def materialize(self) -> np.ndarray:
        """The full dense matrix; only sensible for small ``big_dim``."""
        return self.rows(np.arange(self.big_dim))


def project(phi: ProjectionMatrix, x: SparseVec) -> np.ndarray:
    """``phi.T @ x`` in O(nnz(x) * small_dim)."""
    if x.dim != phi.big_dim:
        raise ValueError(f"dimension mismatch: x.dim={x.dim}, projection big_dim={phi.big_dim}")
    if x.nnz == 0:
        return np.zeros(phi.small_dim)
    return x.values @ phi.rows(x.indices)


def compact_columns(X, columns):
    """Re-index the columns of CSR ``X`` into positions within sorted ``columns``."""
    X = sp.csr_matrix(X)
    pos = np.searchsorted(columns, X.indices)
    if X.indices.size and (
        pos.max() >= columns.size or np.any(columns[pos] != X.indices)
    ):
        raise ValueError("matrix uses a column outside the given set")
    return sp.csr_matrix((X.data, pos, X.indptr), shape=(X.shape[0], columns.size))


def project_rows(phi: ProjectionMatrix, X) -> np.ndarray:
    """``X @ phi`` for a sparse ``n x big_dim`` matrix, generating only touched rows."""
    X = sp.csr_matrix(X)
    if X.shape[1] != phi.big_dim:
        raise ValueError(f"dimension mismatch: {X.shape[1]} columns vs big_dim {phi.big_dim}")
    cols = np.unique(X.indices)
    return np.asarray(compact_columns(X, cols) @ phi.rows(cols))


@dataclass(frozen=True)
class BiasBound:
    k: int
    D: int
    d: int
    xi: float
    eps_prj: float


def _check_domain(k, D, d, xi):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not D >= d >= 1:
        raise ValueError(f"need D >= d >= 1, got D={D}, d={d}")
    if not 0.0 < xi < 1.0:
        raise ValueError(f"xi must lie in (0, 1), got {xi}")


def eps_prj(k, D, d, xi) -> BiasBound:
    """Bound on ``|<phi.T w, phi.T x> - <w, x>|`` per unit ``||w|| ||x||``, w.p. > 1 - xi.

    ``sqrt(48 k / d * ln(4 D / xi))`` for k-sparse x in a D-dimensional space.
    """
    _check_domain(k, D, d, xi)
    return BiasBound(k, D, d, xi, math.sqrt(48.0 * k / d * math.log(4.0 * D / xi)))


def dim_for_eps(k, D, xi, eps) -> int:
    """Smallest integer projection size whose bound is at most ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    _check_domain(k, D, 1, xi)
    d = math.ceil(48.0 * k * math.log(4.0 * D / xi) / eps**2)
    if d > D:
        raise ValueError(f"bound {eps} needs d={d} > D={D}")
    return d
