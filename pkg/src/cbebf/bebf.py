"""Compressed Bellman-error basis function generation (CBEBF).

Each iteration draws a fresh random projection, regresses the current TD
errors on the projected features by ordinary least squares, and adds the
resulting feature to the value estimate with weight one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._rng import derive_seed
from .linalg import SparseVec, ols_fit
from .projection import ProjectionMatrix, compact_columns

__all__ = [
    "ValueEstimate",
    "CbebfConfig",
    "FitReport",
    "IterationRecord",
    "td_errors",
    "cbebf_fit",
    "value_at",
    "iteration_seed",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Component:
    """One generated feature: ``phi @ coef`` for ``phi = ProjectionMatrix(dim, coef.size, seed)``."""

    seed: int
    coef: np.ndarray


@dataclass(frozen=True, eq=False)
class ValueEstimate:
    """Linear value function ``V(x) = x . w`` over a ``dim``-dimensional feature space.

    Coordinates of ``w`` listed in ``tracked`` are stored; any other coordinate
    is regenerated from ``components`` when it is needed, so evaluating ``V``
    is exact at every point without ever storing ``w`` in full.
    """

    dim: int
    tracked: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    tracked_weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    components: tuple = ()

    def __post_init__(self):
        if self.tracked.shape != self.tracked_weights.shape:
            raise ValueError("tracked indices and weights must align")
        if not np.all(np.isfinite(self.tracked_weights)):
            raise ValueError("non-finite weights")

    @classmethod
    def zeros(cls, dim):
        return cls(dim)

    @classmethod
    def from_dense(cls, weights):
        weights = np.asarray(weights, dtype=np.float64)
        return cls(weights.size, np.arange(weights.size), weights.copy())

    @property
    def weights(self) -> np.ndarray:
        """Dense length-``dim`` vector; untracked coordinates are left at zero."""
        out = np.zeros(self.dim)
        out[self.tracked] = self.tracked_weights
        return out

    def weights_at(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        out = np.zeros(indices.shape)
        if indices.size == 0:
            return out
        if self.tracked.size:
            pos = np.minimum(np.searchsorted(self.tracked, indices), self.tracked.size - 1)
            hit = self.tracked[pos] == indices
            out[hit] = self.tracked_weights[pos[hit]]
        else:
            hit = np.zeros(indices.shape, dtype=bool)
        miss = indices[~hit]
        if miss.size and self.components:
            acc = np.zeros(miss.size)
            for c in self.components:
                acc += ProjectionMatrix(self.dim, c.coef.size, c.seed).rows(miss) @ c.coef
            out[~hit] = acc
        return out

    def predict(self, X) -> np.ndarray:
        """Values at the rows of a sparse ``n x dim`` matrix."""
        X = sp.csr_matrix(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        cols = np.unique(X.indices)
        return np.asarray(compact_columns(X, cols) @ self.weights_at(cols))

    def __add__(self, other):
        if not isinstance(other, ValueEstimate):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        tracked = np.union1d(self.tracked, other.tracked)
        return ValueEstimate(
            self.dim,
            tracked,
            self.weights_at(tracked) + other.weights_at(tracked),
            self.components + other.components,
        )


def value_at(v: ValueEstimate, x: SparseVec) -> float:
    if x.dim != v.dim:
        raise ValueError(f"dimension mismatch: x.dim={x.dim}, estimate dim={v.dim}")
    if x.nnz == 0:
        return 0.0
    return float(np.dot(x.values, v.weights_at(x.indices)))


def td_errors(traj, v: ValueEstimate, gamma) -> np.ndarray:
    """``r_t + gamma * V(x_next_t) - V(x_t)`` for every transition."""
    if traj.dim != v.dim:
        raise ValueError(f"dimension mismatch: trajectory dim {traj.dim}, estimate dim {v.dim}")
    return traj.rewards + gamma * v.predict(traj.X_next) - v.predict(traj.X)


@dataclass(frozen=True)
class CbebfConfig:
    num_bebfs: int
    projection_sizes: int | tuple = 20
    gamma: float = 0.9
    seed: int = 0
    stopping: str = "fixed"
    patience: int = 5

    def __post_init__(self):
        if self.num_bebfs < 0:
            raise ValueError("num_bebfs must be >= 0")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.stopping not in ("fixed", "validation"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        sizes = self.projection_sizes
        if isinstance(sizes, (list, tuple)):
            if len(sizes) < self.num_bebfs:
                raise ValueError("projection schedule shorter than num_bebfs")
            if any(int(d) < 1 for d in sizes):
                raise ValueError("projection sizes must be >= 1")
            object.__setattr__(self, "projection_sizes", tuple(int(d) for d in sizes))
        elif int(sizes) < 1:
            raise ValueError("projection size must be >= 1")

    def size(self, i):
        """Projection size for iteration ``i`` (0-based)."""
        sizes = self.projection_sizes
        return sizes[i] if isinstance(sizes, tuple) else int(sizes)


@dataclass(frozen=True)
class IterationRecord:
    d: int
    validation_rp_error: float | None
    wall_time: float
    rank: int


@dataclass(frozen=True)
class FitReport:
    iterations_run: int
    per_iteration: list
    selected_iteration: int
    initial_validation_rp_error: float | None = None

    def rp_curve(self):
        """Validation RP error after 0, 1, ..., iterations_run BEBFs."""
        if self.initial_validation_rp_error is None:
            return None
        return np.array(
            [self.initial_validation_rp_error] + [r.validation_rp_error for r in self.per_iteration]
        )


def iteration_seed(master, i):
    return derive_seed(master, i)


def _rmse(pred, target):
    return float(np.sqrt(np.mean((target - pred) ** 2)))


def cbebf_fit(traj, cfg: CbebfConfig, validation=None, track=()):
    """Run ``cfg.num_bebfs`` iterations of compressed BEBF generation on ``traj``.

    ``validation`` is a ReturnsSample whose RP error is recorded after every
    iteration; with ``cfg.stopping == "validation"`` it also drives early
    stopping and the returned estimate is the snapshot with the lowest
    validation error. ``track`` lists extra sparse matrices (or index arrays)
    whose feature coordinates should be stored in the result.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if cfg.stopping == "validation" and validation is None:
        raise ValueError("validation stopping needs validation data")
    D = traj.dim
    parts = [traj.X.indices, traj.X_next.indices]
    if validation is not None:
        if validation.X.shape[1] != D:
            raise ValueError("validation features have the wrong dimension")
        parts.append(validation.X.indices)
    for extra in track:
        if sp.issparse(extra):
            if extra.shape[1] != D:
                raise ValueError("tracked matrix has the wrong dimension")
            parts.append(sp.csr_matrix(extra).indices)
        else:
            parts.append(np.asarray(extra, dtype=np.int64))
    universe = np.unique(np.concatenate(parts).astype(np.int64))
    if universe.size and (universe[0] < 0 or universe[-1] >= D):
        raise ValueError("tracked index out of range")

    Xc = compact_columns(traj.X, universe)
    Xn = compact_columns(traj.X_next, universe)
    Vc = compact_columns(validation.X, universe) if validation is not None else None
    r = traj.rewards

    w = np.zeros(universe.size)
    components = []
    records = []
    initial = _rmse(np.zeros(validation.returns.size), validation.returns) if validation is not None else None
    best_err, best_iter, best_w = initial, 0, w.copy()
    stale = 0

    for i in range(cfg.num_bebfs):
        t0 = time.perf_counter()
        d = cfg.size(i)
        phi = ProjectionMatrix(D, d, iteration_seed(cfg.seed, i))
        delta = r + cfg.gamma * (Xn @ w) - Xc @ w
        rows = phi.rows(universe)
        sol = ols_fit(Xc @ rows, delta)
        w += rows @ sol.weights
        components.append(Component(phi.seed, sol.weights))
        err = _rmse(Vc @ w, validation.returns) if validation is not None else None
        records.append(IterationRecord(d, err, time.perf_counter() - t0, sol.rank))

        if err is not None:
            if err < best_err:
                best_err, best_iter, best_w, stale = err, i + 1, w.copy(), 0
            else:
                stale += 1
            if cfg.stopping == "validation" and stale >= cfg.patience:
                log.debug("validation stopping after %d iterations (best %d)", i + 1, best_iter)
                break

    if cfg.stopping == "validation":
        selected, final_w = best_iter, best_w
    else:
        selected, final_w = len(records), w
    estimate = ValueEstimate(D, universe, final_w, tuple(components[:selected]))
    report = FitReport(len(records), records, selected, initial)
    return estimate, report
