"""Sparse feature vectors, weighted norms and the SVD least-squares solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseVec",
    "OlsSolution",
    "sparse_dot",
    "ols_fit",
    "weighted_l2",
    "stack",
]

_NORM_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class SparseVec:
    """A ``dim``-dimensional vector holding only its non-zero entries.

    Indices are strictly increasing and every stored value is non-zero.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        val = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if idx.shape != val.shape:
            raise ValueError("indices and values must have equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError("index out of range")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if np.any(val == 0.0):
                raise ValueError("stored values must be non-zero")
            if not np.all(np.isfinite(val)):
                raise ValueError("values must be finite")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, dim, pairs):
        pairs = sorted(pairs)
        idx = [i for i, _ in pairs]
        val = [v for _, v in pairs]
        return cls(dim, np.array(idx, dtype=np.int64), np.array(val, dtype=np.float64))

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        idx = np.flatnonzero(dense)
        return cls(dense.size, idx, dense[idx])

    @classmethod
    def observation(cls, dim, indices, values):
        """Build a feature observation, enforcing ``||x|| <= 1``."""
        x = cls(dim, indices, values)
        if x.norm() > 1.0 + _NORM_SLACK:
            raise ValueError(f"observation norm {x.norm()} exceeds 1")
        return x

    @property
    def nnz(self):
        return self.indices.size

    def norm(self):
        return float(np.sqrt(np.dot(self.values, self.values)))

    def scaled(self, a):
        values = self.values * a
        keep = values != 0.0  # a == 0 or underflow
        return SparseVec(self.dim, self.indices[keep], values[keep])

    def to_dense(self):
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseVec):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        pairs = ", ".join(f"({i}, {v:g})" for i, v in zip(self.indices, self.values))
        return f"SparseVec(dim={self.dim}, [{pairs}])"


def stack(vectors, dim=None):
    """Stack sparse vectors as the rows of a CSR matrix."""
    vectors = list(vectors)
    if dim is None:
        if not vectors:
            raise ValueError("dim is required for an empty stack")
        dim = vectors[0].dim
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for t, x in enumerate(vectors):
        if x.dim != dim:
            raise ValueError(f"dimension mismatch: {x.dim} != {dim}")
        indptr[t + 1] = indptr[t] + x.nnz
    if vectors:
        indices = np.concatenate([x.indices for x in vectors])
        data = np.concatenate([x.values for x in vectors])
    else:
        indices = np.empty(0, np.int64)
        data = np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def sparse_dot(x: SparseVec, v) -> float:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != x.dim:
        raise ValueError(f"dimension mismatch: vector of length {v.shape} vs dim {x.dim}")
    if x.nnz == 0:
        return 0.0
    return float(np.dot(x.values, v[x.indices]))


@dataclass(frozen=True)
class OlsSolution:
    weights: np.ndarray
    rank: int
    singular_values: np.ndarray


def ols_fit(A, y) -> OlsSolution:
    """Minimum-norm least-squares solution ``pinv(A) @ y`` through a thin SVD.

    Singular values below ``s_max * max(n, d) * eps`` are dropped, as are
    subnormal ones, whose reciprocals would overflow.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"design matrix must be 2-d and non-empty, got shape {A.shape}")
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"target length {y.shape[0]} != {A.shape[0]} rows")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in least-squares input")
    n, d = A.shape
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    info = np.finfo(np.float64)
    if s.size == 0 or s[0] < info.tiny:
        return OlsSolution(np.zeros(d), 0, s)
    cutoff = max(s[0] * max(n, d) * info.eps, info.tiny)
    rank = int(np.count_nonzero(s > cutoff))
    coef = (U[:, :rank].T @ y) / s[:rank]
    return OlsSolution(Vt[:rank].T @ coef, rank, s)


def weighted_l2(values, weights) -> float:
    """``sqrt(sum_i weights_i * values_i**2)`` for a probability vector ``weights``."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape:
        raise ValueError("values and weights must have equal shape")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {weights.sum()}")
    return float(np.sqrt(np.dot(weights, values * values)))
