"""Trajectories, featurizers and the synthetic continuous benchmark domain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SparseVec
from .mdp import FiniteMdp, stationary_distribution
from .tiles import TileCoder

__all__ = [
    "Trajectory",
    "OneHot",
    "RandomWalkDomain",
    "sample_trajectory",
    "default_tile_coder",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """``n`` transitions ``(x_t, r_t, x_next_t)`` held as two CSR matrices and a reward vector.

    ``states`` keeps the underlying chain states (length ``n + 1``) when known.
    """

    X: sp.csr_matrix
    X_next: sp.csr_matrix
    rewards: np.ndarray
    states: np.ndarray | None = None
    r_max: float = 1.0

    def __post_init__(self):
        X = sp.csr_matrix(self.X)
        Xn = sp.csr_matrix(self.X_next)
        r = np.asarray(self.rewards, dtype=np.float64).reshape(-1)
        if X.shape != Xn.shape:
            raise ValueError("X and X_next must share a shape")
        if r.shape[0] != X.shape[0]:
            raise ValueError("one reward per transition required")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "X_next", Xn)
        object.__setattr__(self, "rewards", r)

    @classmethod
    def from_rollout(cls, features, rewards, states=None, r_max=1.0):
        """Chain consecutive rows of ``features`` (``n + 1`` observations) into transitions."""
        F = sp.csr_matrix(features)
        return cls(F[:-1], F[1:], rewards, states, r_max)

    @classmethod
    def from_transitions(cls, transitions, dim, r_max=1.0):
        from .linalg import stack

        transitions = list(transitions)
        X = stack([t[0] for t in transitions], dim)
        Xn = stack([t[2] for t in transitions], dim)
        return cls(X, Xn, np.array([t[1] for t in transitions], dtype=np.float64), r_max=r_max)

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @staticmethod
    def _row(M, t):
        lo, hi = M.indptr[t], M.indptr[t + 1]
        order = np.argsort(M.indices[lo:hi])
        return SparseVec(M.shape[1], M.indices[lo:hi][order], M.data[lo:hi][order])

    @property
    def transitions(self):
        for t in range(len(self)):
            yield self._row(self.X, t), float(self.rewards[t]), self._row(self.X_next, t)

    def slice(self, start, stop):
        states = None if self.states is None else self.states[start:stop + 1]
        return Trajectory(self.X[start:stop], self.X_next[start:stop], self.rewards[start:stop], states, self.r_max)


@dataclass(frozen=True)
class OneHot:
    """Tabular features: state ``s`` maps to the unit vector ``e_s``."""

    n_states: int

    @property
    def dim(self):
        return self.n_states

    def encode_many(self, states):
        states = np.asarray(states, dtype=np.int64)
        n = states.size
        return sp.csr_matrix(
            (np.ones(n), states, np.arange(n + 1, dtype=np.int64)), shape=(n, self.n_states)
        )


@dataclass(frozen=True)
class RandomWalkDomain:
    """Bounded, mean-reverting random walk in ``[0, 1]^dims`` under a fixed policy.

    ``s' = clip(s + reversion * (0.5 - s) + step * eps)`` where ``eps`` mixes a
    noise term shared by all coordinates (weight ``coupling``) with independent
    ones, so the walk mostly drifts along a low-dimensional direction. The
    reward has mean ``mean(s)``: a Bernoulli draw by default, or Gaussian noise
    of scale ``reward_noise`` clipped to ``[0, 1]``. Observations append the
    constant ``policy_level`` as an extra coordinate encoding the fixed policy.
    """

    dims: int = 5
    step: float = 0.1
    reversion: float = 0.05
    coupling: float = 0.97
    reward: str = "bernoulli"
    reward_noise: float = 0.1
    policy_level: float = 0.5
    burn_in: int = 50
    r_max: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must lie in [0, 1]")
        if self.reward not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown reward model {self.reward!r}")

    @property
    def obs_dims(self):
        return self.dims + 1

    def _noise(self, rng, n):
        shared = rng.standard_normal((n, 1))
        own = rng.standard_normal((n, self.dims))
        return np.sqrt(self.coupling) * shared + np.sqrt(1.0 - self.coupling) * own

    def _next(self, s, noise):
        return np.clip(s + self.reversion * (0.5 - s) + self.step * noise, 0.0, 1.0)

    def start(self, rng):
        s = np.full(self.dims, rng.uniform())
        for eps in self._noise(rng, self.burn_in):
            s = self._next(s, eps)
        return s

    def rollout(self, n, rng):
        """States ``s_0..s_n`` and rewards ``r_0..r_{n-1}``."""
        states = np.empty((n + 1, self.dims))
        states[0] = self.start(rng)
        noise = self._noise(rng, n)
        for t in range(n):
            states[t + 1] = self._next(states[t], noise[t])
        p = states[:n].mean(axis=1)
        if self.reward == "bernoulli":
            return states, (rng.random(n) < p).astype(np.float64)
        r = p + self.reward_noise * rng.standard_normal(n)
        return states, np.clip(r, 0.0, self.r_max)

    def observe(self, states):
        states = np.atleast_2d(states)
        return np.hstack([states, np.full((states.shape[0], 1), self.policy_level)])


def default_tile_coder(domain: RandomWalkDomain, tiles_per_dim=6, n_grids=10, seed=0):
    """Six tiles per axis, ten random grids over the observation box: D = 10 * 6**6."""
    return TileCoder.random(domain.obs_dims, tiles_per_dim, n_grids, seed=seed)


def _finite_rollout(m: FiniteMdp, n, rng):
    rho = stationary_distribution(m)
    cum = np.cumsum(m.transition, axis=1)
    cum[:, -1] = 1.0
    states = np.empty(n + 1, dtype=np.int64)
    s = int(min(np.searchsorted(np.cumsum(rho), rng.random(), side="right"), m.n_states - 1))
    states[0] = s
    u = rng.random(n)
    for t in range(n):
        s = int(np.searchsorted(cum[s], u[t], side="right"))
        states[t + 1] = s
    return states, m.reward[states[:n]]


def sample_trajectory(source, n, featurizer=None, seed=0) -> Trajectory:
    """Roll ``source`` (a FiniteMdp or RandomWalkDomain) for ``n`` transitions.

    Finite chains start from their stationary distribution and default to
    one-hot features; continuous domains start from their own start
    distribution and need a featurizer exposing ``encode_many``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    if isinstance(source, FiniteMdp):
        featurizer = featurizer or OneHot(source.n_states)
        if n == 0:
            return Trajectory(sp.csr_matrix((0, featurizer.dim)), sp.csr_matrix((0, featurizer.dim)),
                              np.empty(0), np.empty(0, np.int64), source.r_max)
        states, rewards = _finite_rollout(source, n, rng)
        feats = featurizer.encode_many(states)
        return Trajectory.from_rollout(feats, rewards, states, source.r_max)
    if featurizer is None:
        raise ValueError("continuous domains need a featurizer")
    if n == 0:
        empty = sp.csr_matrix((0, featurizer.dim))
        return Trajectory(empty, empty, np.empty(0), None, source.r_max)
    states, rewards = source.rollout(n, rng)
    feats = featurizer.encode_many(source.observe(states))
    return Trajectory.from_rollout(feats, rewards, states, source.r_max)
