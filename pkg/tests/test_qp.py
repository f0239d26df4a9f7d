import itertools

import numpy as np
import pytest

from gustbench.control.qp import kkt_residuals, solve_dense_qp
from gustbench.errors import InfeasibleQPError


def enumerate_qp(H, g, A, b):
    """Reference solver: try every active set, keep the best feasible KKT point."""
    n, m = g.size, A.shape[0]
    best, best_x = np.inf, None
    for r in range(0, min(n, m) + 1):
        for S in itertools.combinations(range(m), r):
            S = list(S)
            K = np.zeros((n + r, n + r))
            K[:n, :n] = H
            K[:n, n:] = A[S].T
            K[n:, :n] = A[S]
            rhs = np.concatenate([-g, b[S]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x, lam = sol[:n], sol[n:]
            if np.any(lam < -1e-9) or np.any(A @ x - b > 1e-9):
                continue
            f = 0.5 * x @ H @ x + g @ x
            if f < best:
                best, best_x = f, x
    return best, best_x


def random_feasible_qp(rng, n, m):
    M = rng.normal(size=(n, n))
    H = M @ M.T + 0.1 * np.eye(n)
    g = rng.normal(size=n) * 3
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.uniform(0, 1, size=m)
    return H, g, A, b


def test_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n, m = rng.integers(2, 6), rng.integers(1, 8)
        H, g, A, b = random_feasible_qp(rng, n, m)
        res = solve_dense_qp(H, g, A, b)
        f_ref, x_ref = enumerate_qp(H, g, A, b)
        assert res.status == "optimal"
        assert abs(res.objective - f_ref) < 1e-6
        np.testing.assert_allclose(res.x, x_ref, atol=1e-6)
        assert res.kkt_residual < 1e-6


def test_unconstrained_minimizer():
    H = np.diag([2.0, 4.0])
    g = np.array([-2.0, 4.0])
    res = solve_dense_qp(H, g)
    np.testing.assert_allclose(res.x, [1.0, -1.0])
    assert res.iterations == 0


def test_scalar_box():
    # min (u - 3)^2  s.t.  u <= 1
    res = solve_dense_qp(np.array([[2.0]]), np.array([-6.0]), np.array([[1.0]]), np.array([1.0]))
    np.testing.assert_allclose(res.x, [1.0])
    assert res.lam[0] == pytest.approx(4.0)


def test_infeasible_detected():
    A = np.array([[1.0], [-1.0]])
    b = np.array([-1.0, -1.0])  # u <= -1 and u >= 1
    with pytest.raises(InfeasibleQPError):
        solve_dense_qp(np.eye(1), np.zeros(1), A, b)


def test_iteration_cap_reports_suboptimal():
    rng = np.random.default_rng(3)
    n = 10
    H = np.eye(n)
    g = -10 * np.ones(n)
    A = np.vstack([np.eye(n), rng.normal(size=(5, n))])
    b = np.concatenate([np.zeros(n), np.ones(5) * 10])
    res = solve_dense_qp(H, g, A, b, max_iter=3)
    assert res.status == "suboptimal"
    full = solve_dense_qp(H, g, A, b)
    assert full.status == "optimal"
    st, pv, cp = kkt_residuals(H, g, A, b, full.x, full.lam)
    assert max(st, pv, cp) < 1e-9


def test_large_box_qp_many_active():
    rng = np.random.default_rng(5)
    n = 60
    M = rng.normal(size=(n, n))
    H = M @ M.T / n + np.eye(n)
    g = rng.normal(size=n) * 20
    A = np.vstack([np.eye(n), -np.eye(n)])
    b = np.ones(2 * n)
    res = solve_dense_qp(H, g, A, b)
    assert res.status == "optimal"
    assert res.kkt_residual < 1e-8
    assert len(res.active) > 10
