import numpy as np
import pytest

from wolf.qp import solve_qp


def grid_objective(H, g, C, d, lo=-1.5, hi=1.5):
    """Best feasible objective on a dense grid (independent oracle).

    1-2 variables: single dense pass at 1e-3. 3 variables: dense coarse
    pass then a 1e-3 refinement around the coarse minimizer.
    """
    n = g.shape[0]

    def best_on(axes):
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        feas = np.ones(len(pts), dtype=bool)
        if C is not None:
            feas = np.all(pts @ C.T <= d + 1e-12, axis=1)
        pts = pts[feas]
        if not len(pts):
            return None, np.inf
        vals = 0.5 * np.einsum("ki,ij,kj->k", pts, H, pts) + pts @ g
        i = int(np.argmin(vals))
        return pts[i], float(vals[i])

    if n == 1:
        return best_on([np.arange(lo, hi + 1e-12, 1e-3)])[1]
    # convex objective over a convex region: one coarse pass finds the
    # basin, then a dense 1e-3 grid around it
    axes = [np.arange(lo, hi + 1e-12, 0.05)] * n
    center, _ = best_on(axes)
    if center is None:
        return np.inf
    axes = [np.arange(c - 0.06, c + 0.06 + 1e-12, 1e-3) for c in center]
    return best_on(axes)[1]


def objective(H, g, x):
    return float(0.5 * x @ H @ x + g @ x)


def test_unconstrained_zero():
    res = solve_qp(np.eye(3), np.zeros(3))
    assert res.ok
    np.testing.assert_allclose(res.x, 0.0, atol=1e-12)


def test_active_bound():
    # min (x-2)^2 s.t. x <= 1  ->  x = 1
    res = solve_qp(np.array([[2.0]]), np.array([-4.0]),
                   C=np.array([[1.0]]), d=np.array([1.0]))
    assert res.ok
    assert res.x[0] == pytest.approx(1.0, abs=1e-9)


def test_equality_pins_variable():
    # level-style usage: x0 fixed to 1, objective prefers the origin
    res = solve_qp(np.eye(2), np.zeros(2),
                   E=np.array([[1.0, 0.0]]), f=np.array([1.0]))
    assert res.ok
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-9)


def test_inconsistent_equalities_infeasible():
    res = solve_qp(np.eye(2), np.zeros(2),
                   E=np.array([[1.0, 0.0], [1.0, 0.0]]), f=np.array([1.0, 2.0]))
    assert res.status == "infeasible"


def test_contradictory_inequalities_infeasible():
    res = solve_qp(np.eye(1), np.zeros(1),
                   C=np.array([[1.0], [-1.0]]), d=np.array([-1.0, -1.0]))
    assert res.status == "infeasible"


def test_duplicate_rows_are_harmless():
    C = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    d = np.array([0.5, 0.5, 0.5])
    res = solve_qp(np.eye(2), np.array([-2.0, -2.0]), C=C, d=d)
    assert res.ok
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-8)


def test_redundant_equalities():
    E = np.array([[1.0, 1.0], [2.0, 2.0]])
    f = np.array([1.0, 2.0])
    res = solve_qp(np.eye(2), np.zeros(2), E=E, f=f)
    assert res.ok
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-9)


def make_random_qp(rng, n):
    A = rng.normal(size=(n + 1, n))
    H = A.T @ A + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    # box keeps the grid oracle bounded; extra rows stay feasible at x_feas
    C = [np.eye(n), -np.eye(n)]
    d = [np.full(n, 1.5), np.full(n, 1.5)]
    x_feas = rng.uniform(-0.5, 0.5, size=n)
    extra = rng.normal(size=(n, n))
    C.append(extra)
    d.append(extra @ x_feas + rng.uniform(0.05, 0.5, size=n))
    return H, g, np.vstack(C), np.concatenate(d)


def test_grid_search_oracle_50_problems():
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = 1 + trial % 3
        H, g, C, d = make_random_qp(rng, n)
        res = solve_qp(H, g, C=C, d=d)
        assert res.ok, f"trial {trial}"
        assert np.all(C @ res.x <= d + 1e-8)
        best = grid_objective(H, g, C, d)
        gap = objective(H, g, res.x) - best
        assert gap <= 1e-5, f"trial {trial}: solver worse than grid by {gap}"
        assert res.kkt_residual <= 1e-8


def test_mixed_equality_inequality_vs_grid():
    # 3 vars with one equality: grid the 2-D reduced space through
    # the parameterization x = x0 + Z y (oracle solves no QP)
    rng = np.random.default_rng(11)
    for _ in range(10):
        H, g, C, d = make_random_qp(rng, 3)
        E = rng.normal(size=(1, 3))
        x_feas = np.zeros(3)
        f = E @ x_feas
        res = solve_qp(H, g, C=C, d=d, E=E, f=f)
        assert res.ok
        np.testing.assert_allclose(E @ res.x, f, atol=1e-9)
        # reduced-space grid
        Q, _ = np.linalg.qr(np.vstack([E, np.eye(3)]).T)
        Z = Q[:, 1:3]
        x0 = np.linalg.lstsq(E, f, rcond=None)[0]
        Hr = Z.T @ H @ Z
        gr = Z.T @ (g + H @ x0)
        Cr = C @ Z
        dr = d - C @ x0
        best = grid_objective(Hr, gr, Cr, dr, lo=-2.0, hi=2.0)
        gap = (objective(H, g, res.x)
               - (best + objective(H, g, x0) - objective(Hr, np.zeros(2), np.zeros(2))
                  + 0.0))
        # compare in reduced coordinates instead (same objective up to const)
        y = Z.T @ (res.x - x0)
        gap = objective(Hr, gr, y) - best
        assert gap <= 1e-5
        assert res.kkt_residual <= 1e-8


def test_determinism_bitwise():
    rng = np.random.default_rng(5)
    H, g, C, d = make_random_qp(rng, 3)
    r1 = solve_qp(H, g, C=C, d=d)
    r2 = solve_qp(H, g, C=C, d=d)
    assert r1.x.tobytes() == r2.x.tobytes()
