"""Experiment harness: Monte Carlo returns, RP error, seeded multi-trial sweeps, CSV output."""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._rng import derive_seed
from .baselines import CompressedValue, clstd_fit
from .bebf import CbebfConfig, cbebf_fit
from .mdp import load_mdp, random_chain
from .sampling import OneHot, RandomWalkDomain, Trajectory, default_tile_coder, sample_trajectory

__all__ = [
    "ReturnsSample",
    "monte_carlo_returns",
    "return_horizon",
    "rp_error",
    "DomainSpec",
    "CbebfSpec",
    "ClstdSpec",
    "ExperimentConfig",
    "ResultRow",
    "run_experiment",
    "write_csv",
    "read_csv",
    "summarize",
    "load_config",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

CSV_HEADER = ["trial", "method", "d", "n", "num_bebfs", "rp_error", "wall_time_ms"]


@dataclass(frozen=True, eq=False)
class ReturnsSample:
    """Test points (rows of ``X``) with their truncated discounted returns."""

    X: sp.csr_matrix
    returns: np.ndarray
    horizon_used: int

    def __len__(self):
        return self.returns.size

    @property
    def points(self):
        traj = Trajectory(self.X, self.X, self.returns)
        return [(x, float(u)) for (x, u, _) in traj.transitions]


def return_horizon(gamma, tol, r_max=1.0):
    """Smallest H with truncation error ``gamma**H * r_max / (1 - gamma) <= tol``."""
    if gamma == 0.0:
        return 1
    if tol <= 0:
        raise ValueError("tol must be positive")
    h = math.ceil(math.log(tol * (1.0 - gamma) / r_max) / math.log(gamma))
    return max(h, 1)


def monte_carlo_returns(traj: Trajectory, gamma, tol=None) -> ReturnsSample:
    """Truncated discounted returns ``U_i = sum_{t<H} gamma^t r_{i+t}`` at every full-horizon point.

    ``tol`` bounds the truncation bias and defaults to ``1e-3 * r_max / (1 - gamma)``.
    """
    r_max = traj.r_max
    if tol is None:
        tol = 1e-3 * r_max / (1.0 - gamma)
    H = return_horizon(gamma, tol, r_max)
    n = len(traj)
    ell = n - H + 1
    if ell < 1:
        raise ValueError(f"trajectory of length {n} has no point with a full horizon of {H}")
    r = traj.rewards
    U = np.zeros(ell)
    disc = 1.0
    for t in range(H):
        U += disc * r[t:t + ell]
        disc *= gamma
    return ReturnsSample(traj.X[:ell], U, H)


def rp_error(v, sample: ReturnsSample) -> float:
    """Root-mean-square gap between ``v``'s predictions and the sampled returns."""
    if len(sample) == 0:
        raise ValueError("empty returns sample")
    pred = v.predict(sample.X) if hasattr(v, "predict") else np.asarray(v, dtype=np.float64)
    return float(np.sqrt(np.mean((sample.returns - pred) ** 2)))


# -- configuration ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    kind: str = "random_walk"
    dims: int = 5
    step: float = 0.1
    reversion: float = 0.05
    coupling: float = 0.97
    reward: str = "bernoulli"
    reward_noise: float = 0.1
    policy_level: float = 0.5
    burn_in: int = 50
    tiles_per_dim: int = 6
    n_grids: int = 10
    tile_seed: int = 0
    # spread feature indices over ``dim_scale`` times as many dimensions
    dim_scale: int = 1
    mdp_file: str | None = None
    n_states: int = 30
    chain_seed: int = 0


@dataclass(frozen=True)
class CbebfSpec:
    d: tuple = (20,)
    m_max: int = 300
    stopping: str = "oracle"
    patience: int = 5
    n_valid: int = 1000


@dataclass(frozen=True)
class ClstdSpec:
    d_grid: tuple = (5, 10, 20, 40, 80, 160)


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    cbebf: CbebfSpec | None = field(default_factory=CbebfSpec)
    clstd: ClstdSpec | None = None
    n_train: tuple = (1500,)
    n_test: int = 5000
    n_trials: int = 10
    gamma: float = 0.9
    master_seed: int = 0
    output: str | None = None
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.n_test < 1 or self.n_trials < 1 or any(n < 1 for n in self.n_train):
            raise ValueError("counts must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.cbebf is None and self.clstd is None:
            raise ValueError("no method configured")


@dataclass(frozen=True)
class ResultRow:
    trial: int
    method: str
    d: int
    n: int
    num_bebfs: int
    rp_error: float
    wall_time_ms: float | None = None
    error: str | None = field(default=None, compare=False)

    @property
    def failed(self):
        return self.error is not None


# -- domain construction ---------------------------------------------------------------------


class _Spread:
    """Featurizer wrapper mapping index ``i`` to ``i * scale`` in a ``scale``-times larger space."""

    def __init__(self, inner, scale):
        self.inner, self.scale = inner, scale

    @property
    def dim(self):
        return self.inner.dim * self.scale

    def encode_many(self, batch):
        F = sp.csr_matrix(self.inner.encode_many(batch))
        idx = F.indices.astype(np.int64) * self.scale
        return sp.csr_matrix((F.data, idx, F.indptr), shape=(F.shape[0], self.dim))


def build_domain(spec: DomainSpec, gamma):
    """Return ``(source, featurizer)`` for :func:`sample_trajectory`."""
    if spec.kind == "random_walk":
        source = RandomWalkDomain(spec.dims, spec.step, spec.reversion, spec.coupling, spec.reward,
                                  spec.reward_noise, spec.policy_level, spec.burn_in)
        feat = default_tile_coder(source, spec.tiles_per_dim, spec.n_grids, spec.tile_seed)
    elif spec.kind == "finite":
        if spec.mdp_file:
            m = load_mdp(spec.mdp_file)
            source = type(m)(m.transition, m.reward, gamma, m.r_max)
        else:
            source = random_chain(spec.n_states, gamma, np.random.default_rng(spec.chain_seed))
        feat = OneHot(source.n_states)
    else:
        raise ValueError(f"unknown domain kind {spec.kind!r}")
    if spec.dim_scale != 1:
        feat = _Spread(feat, spec.dim_scale)
    return source, feat


# -- experiment ------------------------------------------------------------------------------


def _ms(seconds):
    return round(seconds * 1000.0, 3)


def _run_trial(cfg: ExperimentConfig, trial: int):
    rows, curves = [], {}
    tseed = derive_seed(cfg.master_seed, trial)
    source, feat = build_domain(cfg.domain, cfg.gamma)
    tol = 1e-3 * source.r_max / (1.0 - cfg.gamma)
    H = return_horizon(cfg.gamma, tol, source.r_max)
    try:
        test = monte_carlo_returns(
            sample_trajectory(source, cfg.n_test + H - 1, feat, derive_seed(tseed, 2)), cfg.gamma, tol
        )
    except Exception as err:  # noqa: BLE001 - a failed trial must not abort the sweep
        log.warning("trial %d: test sampling failed: %s", trial, err)
        return [ResultRow(trial, "test_sample", 0, 0, 0, math.nan, None, repr(err))], curves

    def timed(t0):
        return _ms(time.perf_counter() - t0) if cfg.timing else None

    for n in cfg.n_train:
        try:
            train = sample_trajectory(source, n, feat, derive_seed(tseed, 1, n))
        except Exception as err:  # noqa: BLE001
            rows.append(ResultRow(trial, "train_sample", 0, n, 0, math.nan, None, repr(err)))
            continue

        if cfg.cbebf is not None:
            spec = cfg.cbebf
            for d in spec.d:
                t0 = time.perf_counter()
                try:
                    seed = derive_seed(tseed, 3, d, n)
                    if spec.stopping == "oracle":
                        fit_cfg = CbebfConfig(spec.m_max, d, cfg.gamma, seed, "fixed")
                        _, report = cbebf_fit(train, fit_cfg, validation=test)
                        curve = report.rp_curve()
                        curves[("cbebf", d, n)] = curve
                        for i, (rec_err) in enumerate(curve):
                            wall = None
                            if cfg.timing and i > 0:
                                wall = _ms(report.per_iteration[i - 1].wall_time)
                            rows.append(ResultRow(trial, "cbebf", d, n, i, float(rec_err), wall))
                        best = int(np.argmin(curve))
                        rows.append(ResultRow(trial, "cbebf_best", d, n, best, float(curve[best]), timed(t0)))
                    else:
                        valid = monte_carlo_returns(
                            sample_trajectory(source, spec.n_valid + H - 1, feat, derive_seed(tseed, 5, n)),
                            cfg.gamma, tol,
                        )
                        fit_cfg = CbebfConfig(spec.m_max, d, cfg.gamma, seed, "validation", spec.patience)
                        est, report = cbebf_fit(train, fit_cfg, validation=valid, track=[test.X])
                        rows.append(ResultRow(trial, "cbebf_valid", d, n, report.selected_iteration,
                                              rp_error(est, test), timed(t0)))
                except Exception as err:  # noqa: BLE001
                    log.warning("trial %d: cbebf d=%d n=%d failed: %s", trial, d, n, err)
                    rows.append(ResultRow(trial, "cbebf", d, n, 0, math.nan, None, repr(err)))

        if cfg.clstd is not None:
            best = None
            for d in cfg.clstd.d_grid:
                t0 = time.perf_counter()
                try:
                    phi, sol = clstd_fit(train, d, cfg.gamma, derive_seed(tseed, 4, d, n))
                    err = rp_error(CompressedValue(phi, sol.weights), test)
                    row = ResultRow(trial, "clstd", d, n, 0, err, timed(t0))
                    if best is None or err < best.rp_error:
                        best = row
                except Exception as exc:  # noqa: BLE001
                    log.warning("trial %d: clstd d=%d n=%d failed: %s", trial, d, n, exc)
                    row = ResultRow(trial, "clstd", d, n, 0, math.nan, None, repr(exc))
                rows.append(row)
            if best is not None:
                rows.append(replace(best, method="clstd_best", wall_time_ms=None))
    return rows, curves


def _sort_key(row: ResultRow):
    return (row.method, row.d, row.n, row.num_bebfs, row.trial)


def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Run every trial, write ``results.csv`` (and ``summary.csv``) when an output dir is given.

    Trials only depend on seeds derived from ``(master_seed, trial)``; with
    ``workers > 1`` they run in separate processes. Rows are sorted before
    output, so the file contents do not depend on execution order.
    """
    trials = range(cfg.n_trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_trial, [cfg] * cfg.n_trials, trials))
    else:
        results = [_run_trial(cfg, t) for t in trials]
    rows = sorted((r for rs, _ in results for r in rs), key=_sort_key)
    out_dir = out_dir or cfg.output
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out / "results.csv")
        write_summary(summarize(rows), out / "summary.csv")
        failures = [r for r in rows if r.failed]
        if failures:
            with open(out / "failures.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["trial", "method", "d", "n", "error"])
                for r in failures:
                    w.writerow([r.trial, r.method, r.d, r.n, r.error])
    return rows


# -- CSV -------------------------------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.trial, r.method, r.d, r.n, r.num_bebfs, _fmt(r.rp_error), _fmt(r.wall_time_ms)])
    return buf.getvalue()


def write_csv(rows, path):
    Path(path).write_text(format_csv(rows))


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [
            ResultRow(int(t), m, int(d), int(n), int(k), float(e), float(w) if w else None)
            for t, m, d, n, k, e, w in reader
        ]


SELECTED = -1


def _group_key(r: ResultRow):
    # per-trial selections vary the selected field, so it is not part of the group
    if r.method == "clstd_best":
        return (r.method, SELECTED, r.n, r.num_bebfs)
    if r.method in ("cbebf_best", "cbebf_valid"):
        return (r.method, r.d, r.n, SELECTED)
    return (r.method, r.d, r.n, r.num_bebfs)


def summarize(rows):
    """Mean and standard error of the mean of ``rp_error`` per (method, d, n, num_bebfs).

    For rows that hold a per-trial selection (``*_best``, ``cbebf_valid``) the
    selected field is reported as -1. Sums use ``math.fsum``, so the result does
    not depend on row order.
    """
    groups = {}
    for r in rows:
        if r.failed or math.isnan(r.rp_error):
            continue
        groups.setdefault(_group_key(r), []).append(r.rp_error)
    out = []
    for key in sorted(groups):
        vals = groups[key]
        k = len(vals)
        mean = math.fsum(vals) / k
        sem = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (k - 1) / k) if k > 1 else 0.0
        out.append((*key, k, mean, sem))
    return out


def write_summary(summary, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "d", "n", "num_bebfs", "trials", "mean_rp_error", "sem_rp_error"])
        for method, d, n, k, count, mean, sem in summary:
            w.writerow([method, d, n, k, count, repr(mean), repr(sem)])


def mean_curve(rows, d, n, method="cbebf"):
    """Trial-averaged RP-error curve indexed by number of BEBFs."""
    summ = [s for s in summarize(rows) if s[0] == method and s[1] == d and s[2] == n]
    summ.sort(key=lambda s: s[3])
    return np.array([s[5] for s in summ])


# -- config files ----------------------------------------------------------------------------


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _coerce(cls, section):
    kinds = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, raw in section.items():
        if key not in kinds:
            raise ValueError(f"unknown key {key!r} for [{cls.__name__}]")
        t = str(kinds[key])
        if "tuple" in t:
            out[key] = _ints(raw)
        elif t.startswith("int"):
            out[key] = int(raw)
        elif t.startswith("float"):
            out[key] = float(raw)
        elif t.startswith("bool"):
            out[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            out[key] = raw.strip()
    return cls(**out)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the INI-style experiment description (see README for the schema)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    unknown = set(cp.sections()) - {"experiment", "domain", "cbebf", "clstd"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    kwargs = {}
    for key, raw in exp.items():
        if key == "n_train":
            kwargs[key] = _ints(raw)
        elif key in ("n_test", "n_trials", "master_seed", "workers"):
            kwargs[key] = int(raw)
        elif key == "gamma":
            kwargs[key] = float(raw)
        elif key == "timing":
            kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        elif key == "output":
            kwargs[key] = raw.strip()
        else:
            raise ValueError(f"unknown key {key!r} in [experiment]")
    kwargs["domain"] = _coerce(DomainSpec, cp["domain"]) if cp.has_section("domain") else DomainSpec()
    kwargs["cbebf"] = _coerce(CbebfSpec, cp["cbebf"]) if cp.has_section("cbebf") else None
    kwargs["clstd"] = _coerce(ClstdSpec, cp["clstd"]) if cp.has_section("clstd") else None
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
