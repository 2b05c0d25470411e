"""LSTD baselines: compressed (random-projection) LSTD and exact tabular LSTD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import SparseVec
from .projection import ProjectionMatrix, compact_columns, project

__all__ = ["LstdSolution", "CompressedValue", "clstd_fit", "tabular_lstd", "RIDGE_SCALE"]

RIDGE_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class LstdSolution:
    weights: np.ndarray
    ridge: float


@dataclass(frozen=True, eq=False)
class CompressedValue:
    """``V(x) = (phi.T x) . weights``."""

    phi: ProjectionMatrix
    weights: np.ndarray

    def predict(self, X) -> np.ndarray:
        X = sp.csr_matrix(X)
        cols = np.unique(X.indices)
        return np.asarray(compact_columns(X, cols) @ (self.phi.rows(cols) @ self.weights))

    def value_at(self, x: SparseVec) -> float:
        return float(project(self.phi, x) @ self.weights)


def lstd_solve(Z, Z_next, rewards, gamma):
    """Solve ``(A + ridge I) w = b`` with ``A = Z^T (Z - gamma Z_next)``, ``b = Z^T r``."""
    A = Z.T @ (Z - gamma * Z_next)
    b = Z.T @ rewards
    A = np.asarray(A.todense()) if sp.issparse(A) else np.asarray(A)
    b = np.asarray(b).reshape(-1)
    ridge = RIDGE_SCALE * abs(np.trace(A)) / A.shape[0]
    M = A + ridge * np.eye(A.shape[0])
    try:
        w = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as err:
        raise ValueError("singular LSTD system") from err
    if not np.all(np.isfinite(w)):
        raise ValueError("singular LSTD system")
    return LstdSolution(w, ridge)


def clstd_fit(traj, d, gamma, seed):
    """LSTD on ``z_t = phi.T x_t`` for a fresh ``D x d`` projection ``phi``.

    Returns the projection and the compressed solution; wrap both in
    :class:`CompressedValue` to evaluate.
    """
    if len(traj) < 1:
        raise ValueError("empty trajectory")
    phi = ProjectionMatrix(traj.dim, d, seed)
    cols = np.unique(np.concatenate([traj.X.indices, traj.X_next.indices]))
    rows = phi.rows(cols)
    Z = np.asarray(compact_columns(traj.X, cols) @ rows)
    Zn = np.asarray(compact_columns(traj.X_next, cols) @ rows)
    return phi, lstd_solve(Z, Zn, traj.rewards, gamma)


def tabular_lstd(traj, gamma) -> LstdSolution:
    """LSTD in the full (small) feature space of one-hot observations.

    Only states visited as ``x_t`` get a weight; the rest stay zero.
    """
    X, Xn = traj.X, traj.X_next
    if np.any(np.diff(X.indptr) != 1) or np.any(X.data != 1.0):
        raise ValueError("tabular LSTD needs one-hot features")
    visited = np.unique(X.indices)
    Xv = compact_columns(X, visited)
    # next-state features outside the visited set carry zero weight
    Xn = sp.csr_matrix(Xn)
    keep = np.isin(Xn.indices, visited)
    Xn_kept = sp.csr_matrix(
        (Xn.data * keep, Xn.indices, Xn.indptr), shape=Xn.shape
    )
    Xn_kept.eliminate_zeros()
    Xnv = compact_columns(Xn_kept, visited)
    A = np.asarray((Xv.T @ (Xv - gamma * Xnv)).todense())
    b = np.asarray(Xv.T @ traj.rewards).reshape(-1)
    ridge = 0.0
    try:
        wv = np.linalg.solve(A, b)
        if not np.all(np.isfinite(wv)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        ridge = RIDGE_SCALE * max(abs(np.trace(A)), 1.0) / A.shape[0]
        wv = np.linalg.solve(A + ridge * np.eye(A.shape[0]), b)
    w = np.zeros(traj.dim)
    w[visited] = wv
    return LstdSolution(w, ridge)
