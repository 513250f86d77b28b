import numpy as np
import pytest
from scipy.optimize import linprog

from emerge.errors import InputError, SolverError
from emerge.lp import solve_lp


def random_feasible_lp(rng, m_ub, m_eq, n):
    x0 = rng.random(n)
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.random(m_ub)
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    c = rng.random(n) + 0.1  # positive costs keep the minimum bounded
    return c, A_ub, b_ub, A_eq, b_eq


@pytest.mark.parametrize("seed", range(40))
def test_simplex_matches_highs(seed):
    rng = np.random.default_rng(seed)
    m_ub, m_eq, n = rng.integers(1, 6), rng.integers(0, 4), rng.integers(4, 12)
    c, A_ub, b_ub, A_eq, b_eq = random_feasible_lp(rng, m_ub, m_eq, n)
    eq = (A_eq, b_eq) if m_eq else (None, None)
    ours = solve_lp(c, A_ub, b_ub, *eq)
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=eq[0], b_eq=eq[1], method="highs")
    assert ours.value == pytest.approx(ref.fun, abs=1e-7)
    # dual objective equals the primal value (sensitivity convention)
    dual_obj = ours.duals_ub @ b_ub + (ours.duals_eq @ b_eq if m_eq else 0.0)
    assert dual_obj == pytest.approx(ours.value, abs=1e-7)
    assert np.all(ours.x >= -1e-12)
    assert np.all(A_ub @ ours.x <= b_ub + 1e-8)


def test_maximize_flips_sign():
    res = solve_lp([1.0, 1.0], [[1.0, 2.0], [3.0, 1.0]], [4.0, 6.0], maximize=True)
    assert res.value == pytest.approx(2.8)
    np.testing.assert_allclose(res.x, [1.6, 1.2], atol=1e-12)


def test_degenerate_transport_problem():
    # 3x3 assignment-like polytope, heavily degenerate
    n = 3
    A_eq, b_eq = [], []
    for i in range(n):
        row = np.zeros(n * n)
        row[i * n : (i + 1) * n] = 1
        A_eq.append(row)
        b_eq.append(1 / n)
    for j in range(n):
        row = np.zeros(n * n)
        row[j::n] = 1
        A_eq.append(row)
        b_eq.append(1 / n)
    c = -np.eye(n).ravel()
    res = solve_lp(c, A_eq=np.array(A_eq), b_eq=np.array(b_eq))
    assert res.value == pytest.approx(-1.0)


def test_infeasible_raises():
    with pytest.raises(SolverError):
        solve_lp([1.0], A_eq=[[1.0]], b_eq=[-1.0])


def test_unbounded_raises():
    with pytest.raises(SolverError):
        solve_lp([-1.0, 0.0], [[0.0, 1.0]], [1.0])


def test_shape_mismatch_is_input_error():
    with pytest.raises(InputError):
        solve_lp([1.0, 2.0], [[1.0]], [1.0])
