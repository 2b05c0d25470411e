"""Compressed Bellman-error basis functions for policy evaluation in sparse feature spaces."""

from .baselines import CompressedValue, LstdSolution, clstd_fit, tabular_lstd
from .bebf import CbebfConfig, FitReport, ValueEstimate, cbebf_fit, td_errors, value_at
from .bench import (
    ExperimentConfig,
    ResultRow,
    ReturnsSample,
    monte_carlo_returns,
    rp_error,
    run_experiment,
)
from .linalg import OlsSolution, SparseVec, ols_fit, sparse_dot, weighted_l2
from .mdp import (
    FiniteMdp,
    MixingMatrix,
    bellman_apply,
    bellman_error,
    exact_value,
    mixing_matrix,
    operator_norm,
    stationary_distribution,
)
from .projection import BiasBound, ProjectionMatrix, eps_prj, project
from .sampling import OneHot, RandomWalkDomain, Trajectory, sample_trajectory
from .tiles import TileCoder

__version__ = "0.1.0"
