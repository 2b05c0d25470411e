"""Exact oracles for finite fixed-policy Markov reward chains."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "FiniteMdp",
    "MixingMatrix",
    "exact_value",
    "bellman_apply",
    "bellman_error",
    "stationary_distribution",
    "mixing_matrix",
    "operator_norm",
    "random_chain",
    "load_mdp",
    "parse_mdp",
]


class NotUniqueError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """A chain with the policy already folded into the transition matrix."""

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    r_max: float | None = None

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        R = np.array(self.reward, dtype=np.float64).reshape(-1)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise ValueError(f"transition must be square, got shape {P.shape}")
        if R.shape[0] != P.shape[0]:
            raise ValueError("reward length must equal number of states")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(R))):
            raise ValueError("non-finite transition or reward")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("transition rows must be probability vectors")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        r_max = float(R.max()) if self.r_max is None else float(self.r_max)
        if np.any(R < 0) or np.any(R > r_max):
            raise ValueError(f"rewards must lie in [0, {r_max}]")
        P.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "r_max", r_max)

    @property
    def n_states(self):
        return self.transition.shape[0]


def exact_value(m: FiniteMdp) -> np.ndarray:
    """Solve ``(I - gamma P) V = R``."""
    A = np.eye(m.n_states) - m.gamma * m.transition
    try:
        V = np.linalg.solve(A, m.reward)
    except np.linalg.LinAlgError as err:
        raise ValueError("singular Bellman system") from err
    return V


def _as_values(m, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.n_states,):
        raise ValueError(f"value vector has shape {v.shape}, expected ({m.n_states},)")
    return v


def bellman_apply(m: FiniteMdp, v) -> np.ndarray:
    return m.reward + m.gamma * (m.transition @ _as_values(m, v))


def bellman_error(m: FiniteMdp, v) -> np.ndarray:
    v = _as_values(m, v)
    return bellman_apply(m, v) - v


def _closed_classes(P):
    n_comp, labels = connected_components(sp.csr_matrix(P > 0), directed=True, connection="strong")
    leaves = np.ones(n_comp, dtype=bool)
    src, dst = np.nonzero(P > 0)
    leaves[labels[src][labels[src] != labels[dst]]] = False
    return int(leaves.sum())


def stationary_distribution(m: FiniteMdp, tol=1e-10, max_iter=1_000_000) -> np.ndarray:
    """Power iteration ``rho <- rho P`` from the uniform distribution.

    Raises if the chain has more than one closed class (stationary measure not
    unique) or if the iteration has not converged after ``max_iter`` steps.
    """
    P = m.transition
    if _closed_classes(P) != 1:
        raise NotUniqueError("chain has several closed classes; stationary distribution not unique")
    rho = np.full(m.n_states, 1.0 / m.n_states)
    for _ in range(max_iter):
        nxt = rho @ P
        nxt /= nxt.sum()
        if np.abs(nxt - rho).sum() <= tol:
            return nxt
        rho = nxt
    raise RuntimeError(f"power iteration did not converge in {max_iter} steps (periodic chain?)")


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Upper-triangular ``Gamma_n`` of worst-case multi-step TV distances (square-rooted)."""

    entries: np.ndarray

    @property
    def n(self):
        return self.entries.shape[0]


def _max_tv(Pm):
    # max over state pairs of 0.5 * L1 distance between rows
    best = 0.0
    for i in range(Pm.shape[0] - 1):
        tv = 0.5 * np.abs(Pm[i + 1:] - Pm[i]).sum(axis=1).max()
        best = max(best, tv)
    return min(best, 1.0)


def mixing_matrix(m: FiniteMdp, n: int) -> MixingMatrix:
    if n < 1:
        raise ValueError("horizon must be >= 1")
    lag = np.empty(n)
    lag[0] = 1.0
    Pm = np.eye(m.n_states)
    for k in range(1, n):
        Pm = Pm @ m.transition
        lag[k] = np.sqrt(_max_tv(Pm))
    i, j = np.triu_indices(n)
    G = np.zeros((n, n))
    G[i, j] = lag[j - i]
    return MixingMatrix(G)


def operator_norm(mix: MixingMatrix, tol=1e-10, max_iter=100_000) -> float:
    """Largest singular value of ``Gamma_n`` by power iteration on ``Gamma^T Gamma``."""
    G = mix.entries
    v = np.full(G.shape[1], 1.0 / np.sqrt(G.shape[1]))
    lam = 0.0
    for _ in range(max_iter):
        u = G.T @ (G @ v)
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - lam) <= tol * new:
            return float(np.sqrt(new))
        lam = new
    raise RuntimeError("operator norm power iteration did not converge")


def random_chain(n_states, gamma, rng, concentration=1.0, r_max=1.0) -> FiniteMdp:
    """Dirichlet transition rows and uniform rewards in ``[0, r_max]``."""
    P = rng.dirichlet(np.full(n_states, concentration), size=n_states)
    R = rng.uniform(0.0, r_max, size=n_states)
    return FiniteMdp(P, R, gamma, r_max=r_max)


def parse_mdp(text: str) -> FiniteMdp:
    """Plain-text format: ``S gamma``, then S rows of P, then one row of R."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise ValueError("first line must be 'S gamma'")
    S = int(lines[0][0])
    gamma = float(lines[0][1])
    if S < 1:
        raise ValueError("S must be positive")
    if len(lines) != S + 2:
        raise ValueError(f"expected {S + 2} non-empty lines, found {len(lines)}")
    P = np.array([[float(t) for t in row] for row in lines[1:S + 1]])
    R = np.array([float(t) for t in lines[S + 1]])
    if P.shape != (S, S) or R.shape != (S,):
        raise ValueError("matrix or reward row has the wrong number of entries")
    return FiniteMdp(P, R, gamma)


def load_mdp(path) -> FiniteMdp:
    return parse_mdp(Path(path).read_text())
