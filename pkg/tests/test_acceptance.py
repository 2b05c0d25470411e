"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as a script.
"""

import math
import time

import numpy as np
import pytest

from cbebf.bebf import CbebfConfig, cbebf_fit
from cbebf.bench import (
    CbebfSpec,
    ClstdSpec,
    DomainSpec,
    ExperimentConfig,
    build_domain,
    format_csv,
    mean_curve,
    monte_carlo_returns,
    run_experiment,
    summarize,
)
from cbebf.linalg import SparseVec, weighted_l2
from cbebf.mdp import (
    FiniteMdp,
    bellman_apply,
    bellman_error,
    exact_value,
    mixing_matrix,
    operator_norm,
    random_chain,
    stationary_distribution,
)
from cbebf.projection import ProjectionMatrix, dim_for_eps, eps_prj, project
from cbebf.sampling import sample_trajectory

pytestmark = pytest.mark.acceptance

# the synthetic tile-coded benchmark domain shared by criteria 5, 6, 7 and 9
DOMAIN = DomainSpec(kind="random_walk", step=0.1, reversion=0.05, coupling=0.97, reward="bernoulli",
                    tiles_per_dim=6, n_grids=10)
GAMMA = 0.5
MASTER_SEED = 2012


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, f"criterion {n} failed: {detail}"

    return emit


@pytest.fixture(scope="module")
def comparison_run():
    cfg = ExperimentConfig(domain=DOMAIN, cbebf=CbebfSpec(d=(20,), m_max=300, stopping="oracle"),
                           clstd=ClstdSpec(d_grid=(5, 10, 20, 40, 80, 160)), n_train=(500, 1500),
                           n_test=5000, n_trials=10, gamma=GAMMA, master_seed=MASTER_SEED)
    t0 = time.perf_counter()
    rows = run_experiment(cfg)
    return cfg, rows, time.perf_counter() - t0


def test_1_bellman_contraction(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = -np.inf
    for _ in range(20):
        m = random_chain(50, 0.9, rng)
        V, rho = exact_value(m), stationary_distribution(m)
        for _ in range(100):
            v = rng.normal(0.0, 3.0, 50) + rng.uniform(-5, 5)
            gap = weighted_l2(V - bellman_apply(m, v), rho) - m.gamma * weighted_l2(V - v, rho)
            worst = max(worst, gap)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    report(1, "Bellman contraction", ok,
           f"max(||V-TV|| - g||V-v||) = {worst:.3e} <= 1e-9 over 2000 vectors; {elapsed:.2f} s < 10 s")


def test_2_noisy_bebf_dichotomy(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    violations, steps = 0, 0
    details = []
    for c in (0.01, 0.1):
        for _ in range(10):
            m = random_chain(30, 0.9, rng, r_max=1.0)
            V, rho = exact_value(m), stationary_distribution(m)
            bound = (1 + m.gamma) / (1 - m.gamma) ** 2 * c
            v = rng.normal(0.0, 40.0, 30)  # start well above both bounds
            err = weighted_l2(V - v, rho)
            for _ in range(15):
                psi = bellman_error(m, v) + rng.uniform(-c, c, 30)
                v = v + psi
                new = weighted_l2(V - v, rho)
                steps += 1
                if not (new < err or err <= bound + 1e-6):
                    violations += 1
                err = new
        details.append(f"c={c}: bound {(1 + 0.9) / (1 - 0.9) ** 2 * c:.2f}")
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 10
    report(2, "noisy-BEBF dichotomy", ok,
           f"{violations} violations in {steps} steps ({', '.join(details)}); {elapsed:.2f} s < 10 s")


def test_3_cbebf_geometric_convergence(report):
    t0 = time.perf_counter()
    passes, ratios = 0, []
    for run in range(10):
        m = random_chain(30, 0.9, np.random.default_rng(1000 + run))
        V, rho = exact_value(m), stationary_distribution(m)
        traj = sample_trajectory(m, 50_000, seed=2000 + run)
        est, _ = cbebf_fit(traj, CbebfConfig(8, 30, 0.9, seed=3000 + run))
        ratio = weighted_l2(V - est.weights, rho) / weighted_l2(V, rho)
        ratios.append(ratio)
        passes += ratio <= (0.9 + 0.05) ** 8
    elapsed = time.perf_counter() - t0
    ok = passes >= 9 and elapsed < 60
    report(3, "CBEBF geometric convergence", ok,
           f"{passes}/10 runs with ||V-V_8||/||V|| <= {0.95 ** 8:.4f} (max {max(ratios):.4f}); "
           f"{elapsed:.2f} s < 60 s")


def test_4_projection_bias_bound(report):
    k, D, xi, eps = 10, 100_000, 0.05, 0.5
    d = dim_for_eps(k, D, xi, eps)
    bound = eps_prj(k, D, d, xi).eps_prj
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    bad, worst = 0, 0.0
    for t in range(1000):
        # supports share a random number of coordinates so <w, x> spans [-1, 1]
        shared = int(rng.integers(0, k + 1))
        idx = rng.choice(D, size=2 * k - shared, replace=False)
        iw, ix = np.sort(idx[:k]), np.sort(idx[k - shared:])
        vw, vx = rng.standard_normal(k), rng.standard_normal(k)
        w = SparseVec(D, iw, vw / np.linalg.norm(vw))
        x = SparseVec(D, ix, vx / np.linalg.norm(vx))
        phi = ProjectionMatrix(D, d, int(rng.integers(0, 2**63)))
        gap = abs(project(phi, w) @ project(phi, x) - w.to_dense() @ x.to_dense())
        worst = max(worst, gap)
        bad += gap > eps
    elapsed = time.perf_counter() - t0
    ok = bad / 1000 <= 0.05 and elapsed < 30
    report(4, "projection bias bound", ok,
           f"d={d} (eps_prj={bound:.4f}); violation rate {bad / 1000:.3f} <= 0.05, worst gap {worst:.4f}; "
           f"{elapsed:.2f} s < 30 s")


def test_5_overfitting_curve(report):
    cfg = ExperimentConfig(domain=DOMAIN, cbebf=CbebfSpec(d=(10, 20, 30), m_max=300, stopping="oracle"),
                           clstd=None, n_train=(1500,), n_test=5000, n_trials=10, gamma=GAMMA,
                           master_seed=MASTER_SEED)
    src, feat = build_domain(cfg.domain, GAMMA)
    assert feat.dim == 466_560
    t0 = time.perf_counter()
    rows = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    assert not any(r.failed for r in rows)
    curves = {d: mean_curve(rows, d, 1500) for d in (10, 20, 30)}
    c20 = curves[20]
    i20 = int(np.argmin(c20))
    interior = 0 < i20 < 300 and c20[i20] < c20[300]
    arg = {d: int(np.argmin(c)) for d, c in curves.items()}
    ok = interior and arg[10] > arg[30] and elapsed < 600
    report(5, "overfitting curve shape", ok,
           f"d=20 mean RP error min {c20[i20]:.4f} at iteration {i20} < {c20[300]:.4f} at 300; "
           f"argmin d=10/20/30 = {arg[10]}/{arg[20]}/{arg[30]}; {elapsed:.1f} s < 600 s")


def test_6_cbebf_beats_clstd(report, comparison_run):
    _, rows, elapsed = comparison_run
    summ = {(s[0], s[2]): s[5] for s in summarize(rows) if s[0] in ("cbebf_best", "clstd_best")}
    parts, ok = [], elapsed < 900
    for n in (500, 1500):
        cb, cl = summ[("cbebf_best", n)], summ[("clstd_best", n)]
        ok &= cb <= cl
        parts.append(f"n={n}: CBEBF {cb:.4f} vs CLSTD {cl:.4f}")
    report(6, "best RP error ordering", ok, "; ".join(parts) + f"; {elapsed:.1f} s < 900 s")


def _timing_data(scale):
    src, feat = build_domain(DomainSpec(**{**DOMAIN.__dict__, "dim_scale": scale}), GAMMA)
    train = sample_trajectory(src, 1500, feat, seed=71)
    test = monte_carlo_returns(sample_trajectory(src, 5000 + 20, feat, seed=72), GAMMA)
    return feat.dim, train, test


def test_7_dimension_independent_cost(report):
    data = {s: _timing_data(s) for s in (1, 2)}
    times = {1: [], 2: []}
    cbebf_fit(data[1][1], CbebfConfig(5, 20, GAMMA), validation=data[1][2])  # warm-up
    for rep in range(12):
        # alternate the order fit by fit so slow phases of the machine hit both sizes alike
        for s in ((1, 2) if rep % 2 == 0 else (2, 1)):
            _, fit = cbebf_fit(data[s][1], CbebfConfig(30, 20, GAMMA, seed=rep), validation=data[s][2])
            times[s].extend(rec.wall_time for rec in fit.per_iteration)
    D1, D2 = data[1][0], data[2][0]
    m1, m2 = float(np.median(times[1])), float(np.median(times[2]))
    ratio = m2 / m1
    ok = D1 == 466_560 and D2 == 933_120 and abs(ratio - 1) <= 0.25
    report(7, "D-independent iteration cost", ok,
           f"median per-iteration {m1 * 1e3:.2f} ms at D={D1} vs {m2 * 1e3:.2f} ms at D={D2} "
           f"(ratio {ratio:.3f}, within 25%)")


def test_8_oracle_values(report):
    two = FiniteMdp([[0, 1], [1, 0]], [1, 0], 0.5)
    e1 = np.abs(exact_value(two) - [4 / 3, 2 / 3]).max()
    rho = stationary_distribution(FiniteMdp([[0.9, 0.1], [0.5, 0.5]], [0, 1], 0.5))
    e2 = np.abs(rho - [5 / 6, 1 / 6]).max()
    iid = FiniteMdp(np.tile([0.1, 0.6, 0.3], (3, 1)), [0, 1, 0], 0.5)
    e3 = abs(operator_norm(mixing_matrix(iid, 20)) - 1.0)
    ok = e1 <= 1e-12 and e2 <= 1e-10 and e3 <= 1e-9
    report(8, "oracle cross-checks", ok,
           f"value err {e1:.1e} <= 1e-12; stationary err {e2:.1e} <= 1e-10; mixing norm err {e3:.1e} <= 1e-9")


def test_9_byte_identical_rerun(report, comparison_run):
    cfg, rows, _ = comparison_run
    first = format_csv(rows).encode()
    second = format_csv(run_experiment(cfg)).encode()
    ok = first == second
    report(9, "deterministic CSV", ok,
           f"{len(rows)} rows, {len(first)} bytes; rerun with master seed {cfg.master_seed} "
           f"{'identical' if ok else 'differs'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
