import numpy as np
import pytest
import scipy.sparse as sp
from scipy.stats import ortho_group

from cbebf.baselines import CompressedValue, clstd_fit, lstd_solve, tabular_lstd
from cbebf.bebf import ValueEstimate, td_errors
from cbebf.linalg import weighted_l2
from cbebf.mdp import FiniteMdp, exact_value, random_chain, stationary_distribution
from cbebf.projection import ProjectionMatrix
from cbebf.sampling import Trajectory, sample_trajectory

from conftest import two_cycle


def _empirical_model(traj, S):
    s, sn = traj.X.indices, traj.X_next.indices
    counts = np.zeros((S, S))
    np.add.at(counts, (s, sn), 1.0)
    visits = counts.sum(axis=1)
    R = np.bincount(s, weights=traj.rewards, minlength=S)
    return counts, visits, R


def test_clstd_zero_rewards(rng):
    m = random_chain(10, 0.9, rng)
    t = sample_trajectory(m, 2000, seed=1)
    t0 = Trajectory(t.X, t.X_next, np.zeros(len(t)))
    _, sol = clstd_fit(t0, 6, 0.9, seed=3)
    np.testing.assert_array_equal(sol.weights, np.zeros(6))


def test_clstd_recovers_exact_value_full_projection():
    m = random_chain(20, 0.9, np.random.default_rng(5))
    t = sample_trajectory(m, 100_000, seed=2)
    phi, sol = clstd_fit(t, 20, 0.9, seed=7)
    V_hat = CompressedValue(phi, sol.weights).predict(sp.identity(20, format="csr"))
    V, rho = exact_value(m), stationary_distribution(m)
    assert weighted_l2(V_hat - V, rho) <= 0.05 * weighted_l2(V, rho)


def test_clstd_deterministic(rng):
    t = sample_trajectory(random_chain(10, 0.9, rng), 500, seed=1)
    a = clstd_fit(t, 5, 0.9, seed=11)[1].weights
    b = clstd_fit(t, 5, 0.9, seed=11)[1].weights
    np.testing.assert_array_equal(a, b)


def test_clstd_matches_normal_equations(rng):
    t = sample_trajectory(random_chain(12, 0.9, rng), 800, seed=4)
    phi, sol = clstd_fit(t, 6, 0.9, seed=2)
    P = phi.materialize()
    Z, Zn = t.X.toarray() @ P, t.X_next.toarray() @ P
    A = Z.T @ (Z - 0.9 * Zn)
    w = np.linalg.solve(A + sol.ridge * np.eye(6), Z.T @ t.rewards)
    np.testing.assert_allclose(sol.weights, w, rtol=1e-10, atol=1e-12)
    assert sol.ridge == pytest.approx(1e-8 * abs(np.trace(A)) / 6, rel=1e-10)


def test_compressed_value_two_paths(rng):
    t = sample_trajectory(random_chain(12, 0.9, rng), 300, seed=4)
    phi, sol = clstd_fit(t, 6, 0.9, seed=2)
    cv = CompressedValue(phi, sol.weights)
    pred = cv.predict(t.X)
    for i, (x, _, _) in enumerate(t.transitions):
        assert cv.value_at(x) == pytest.approx(pred[i], abs=1e-12)


def test_clstd_invariant_to_rotation(rng):
    t = sample_trajectory(random_chain(25, 0.9, rng), 3000, seed=8)
    d = 10
    Phi = ProjectionMatrix(25, d, 3).materialize()
    Q = ortho_group.rvs(d, random_state=1)
    X, Xn = t.X.toarray(), t.X_next.toarray()

    def values(P):
        sol = lstd_solve(X @ P, Xn @ P, t.rewards, 0.9)
        return np.eye(25) @ P @ sol.weights

    np.testing.assert_allclose(values(Phi), values(Phi @ Q), atol=1e-9)


def test_clstd_empty_trajectory_rejected(rng):
    t = sample_trajectory(random_chain(4, 0.9, rng), 0, seed=1)
    with pytest.raises(ValueError):
        clstd_fit(t, 2, 0.9, seed=0)


# -- tabular LSTD ---------------------------------------------------------------------------


def test_tabular_two_cycle():
    t = sample_trajectory(two_cycle(), 10_000, seed=0)
    np.testing.assert_allclose(tabular_lstd(t, 0.5).weights, [4 / 3, 2 / 3], atol=1e-12)


def test_tabular_single_transition():
    X = sp.csr_matrix(np.array([[0.0, 1.0, 0.0]]))
    Xn = sp.csr_matrix(np.array([[1.0, 0.0, 0.0]]))
    sol = tabular_lstd(Trajectory(X, Xn, [0.7]), 0.9)
    # only state 1 visited; its successor has no weight, so V(1) = r
    np.testing.assert_allclose(sol.weights, [0.0, 0.7, 0.0], atol=1e-15)


def test_tabular_needs_no_ridge(rng):
    # restricted to visited states, A is strictly diagonally dominant for gamma < 1
    t = sample_trajectory(random_chain(8, 0.99, rng), 50, seed=2)
    assert tabular_lstd(t, 0.99).ridge == 0.0


def test_tabular_rejects_non_one_hot():
    X = sp.csr_matrix(np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        tabular_lstd(Trajectory(X, X, [0.0]), 0.5)


def test_tabular_equals_empirical_model(rng):
    S = 12
    m = random_chain(S, 0.9, rng)
    t = sample_trajectory(m, 3000, seed=6)
    counts, visits, R = _empirical_model(t, S)
    seen = visits > 0
    P_hat = counts[np.ix_(seen, seen)] / visits[seen, None]
    V_model = np.linalg.solve(np.eye(seen.sum()) - 0.9 * P_hat, R[seen] / visits[seen])
    np.testing.assert_allclose(tabular_lstd(t, 0.9).weights[seen], V_model, atol=1e-9)


def test_tabular_fixed_point_per_state(rng):
    S = 15
    t = sample_trajectory(random_chain(S, 0.9, rng), 4000, seed=9)
    v = ValueEstimate.from_dense(tabular_lstd(t, 0.9).weights)
    delta = td_errors(t, v, 0.9)
    per_state = np.bincount(t.X.indices, weights=delta, minlength=S)
    visits = np.bincount(t.X.indices, minlength=S)
    assert np.abs(per_state[visits > 0] / visits[visits > 0]).max() <= 1e-8


def test_tabular_equals_clstd_full_rank(rng):
    S = 10
    m = random_chain(S, 0.9, rng)
    t = sample_trajectory(m, 20_000, seed=3)
    rho = stationary_distribution(m)
    phi, sol = clstd_fit(t, S, 0.9, seed=1)
    assert np.linalg.cond(phi.materialize()) < 1e3
    v_c = CompressedValue(phi, sol.weights).predict(sp.identity(S, format="csr"))
    assert weighted_l2(v_c - tabular_lstd(t, 0.9).weights, rho) <= 1e-3
