"""Two-phase simplex against hand solutions and scipy's solver."""

import numpy as np
import pytest

import lqsignal as lq
from lqsignal.lp import LPInfeasibleError, LPUnboundedError, small_lp_solve

scipy_linprog = pytest.importorskip("scipy.optimize").linprog


def test_hand_example_inequalities():
    # min -x - 2y s.t. x + y <= 4, x <= 3, y <= 2  ->  (2, 2), value -6
    sol = small_lp_solve(
        np.array([-1.0, -2.0]),
        A_ub=np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]),
        b_ub=np.array([4.0, 3.0, 2.0]),
    )
    assert np.allclose(sol.x, [2.0, 2.0], atol=1e-12)
    assert sol.value == pytest.approx(-6.0)


def test_hand_example_equalities():
    # transportation-style: x1 + x2 = 1, minimize 3x1 + x2 -> (0, 1)
    sol = small_lp_solve(
        np.array([3.0, 1.0]), A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([1.0])
    )
    assert np.allclose(sol.x, [0.0, 1.0], atol=1e-12)
    assert sol.value == pytest.approx(1.0)


def test_free_variable_goes_negative():
    # min x s.t. x >= -5 written as -x <= 5, x free
    sol = small_lp_solve(
        np.array([1.0]),
        A_ub=np.array([[-1.0]]),
        b_ub=np.array([5.0]),
        free_vars=(0,),
    )
    assert sol.x[0] == pytest.approx(-5.0)


def test_infeasible_raises():
    with pytest.raises(LPInfeasibleError):
        small_lp_solve(
            np.array([1.0]),
            A_ub=np.array([[1.0], [-1.0]]),
            b_ub=np.array([1.0, -2.0]),  # x <= 1 and x >= 2
        )


def test_unbounded_raises():
    with pytest.raises(LPUnboundedError):
        small_lp_solve(np.array([-1.0]))  # min -x, x >= 0 unconstrained above


def test_degenerate_and_redundant_rows():
    # duplicated equality row must not break the phase-1 cleanup
    sol = small_lp_solve(
        np.array([1.0, 1.0]),
        A_eq=np.array([[1.0, 1.0], [1.0, 1.0]]),
        b_eq=np.array([1.0, 1.0]),
    )
    assert sol.value == pytest.approx(1.0)


def test_duals_satisfy_strong_duality():
    c = np.array([-1.0, -2.0])
    A_ub = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    b_ub = np.array([4.0, 3.0, 2.0])
    sol = small_lp_solve(c, A_ub=A_ub, b_ub=b_ub)
    assert sol.duals_ub.max() <= 1e-12  # minimization, <= rows
    assert sol.value == pytest.approx(float(sol.duals_ub @ b_ub), abs=1e-9)
    # complementary slackness on the inactive row
    slack = b_ub - A_ub @ sol.x
    assert np.min(np.abs(sol.duals_ub) * slack) <= 1e-9


def _random_lp(rng):
    n = rng.integers(2, 6)
    n_ub = rng.integers(1, 5)
    n_eq = rng.integers(0, 3)
    c = rng.standard_normal(n)
    A_ub = rng.standard_normal((n_ub, n))
    x_feas = rng.random(n)  # keeps the instance feasible by construction
    b_ub = A_ub @ x_feas + rng.random(n_ub)
    A_eq = rng.standard_normal((n_eq, n)) if n_eq else None
    b_eq = A_eq @ x_feas if n_eq else None
    return c, A_ub, b_ub, A_eq, b_eq


def test_matches_scipy_on_random_instances():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(60):
        c, A_ub, b_ub, A_eq, b_eq = _random_lp(rng)
        ref = scipy_linprog(
            c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None)
        )
        if ref.status == 3:
            with pytest.raises(LPUnboundedError):
                small_lp_solve(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
            continue
        assert ref.status == 0
        sol = small_lp_solve(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
        assert sol.value == pytest.approx(ref.fun, abs=1e-8)
        checked += 1
    assert checked >= 30


def test_matches_scipy_with_free_variables():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = 3
        c = rng.standard_normal(n)
        A_ub = rng.standard_normal((4, n))
        b_ub = A_ub @ rng.random(n) + 1.0
        # box the free variable so the instance stays bounded
        A_ub = np.vstack([A_ub, [[1.0, 0.0, 0.0]], [[-1.0, 0.0, 0.0]]])
        b_ub = np.concatenate([b_ub, [10.0, 10.0]])
        ref = scipy_linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub,
            bounds=[(None, None), (0, None), (0, None)],
        )
        if ref.status != 0:
            continue
        sol = small_lp_solve(c, A_ub=A_ub, b_ub=b_ub, free_vars=(0,))
        assert sol.value == pytest.approx(ref.fun, abs=1e-8)


def test_lambda_lp_hand_example():
    # two types, two candidates: hand-solved mixing point
    p_hat = np.array([0.5, 0.5])
    costs = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = lq.lambda_lp(p_hat, costs)
    assert out.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(out.lam, [0.5, 0.5], atol=1e-9)
    assert out.lam.min() >= -1e-12
    assert out.lam.sum() == pytest.approx(1.0)


def test_lambda_lp_strong_duality_random(rng):
    from lqsignal.oracles import finite_dual_value_exact

    for _ in range(25):
        M = int(rng.integers(1, 7))
        costs = rng.standard_normal((2, M))
        p_hat = rng.dirichlet(np.ones(2))
        out = lq.lambda_lp(p_hat, costs)
        want = finite_dual_value_exact(p_hat, costs)
        assert out.value == pytest.approx(want, abs=1e-9)
        # primal witness: the returned mixture attains the epigraph value
        assert float(np.max(p_hat - costs @ out.lam)) == pytest.approx(
            out.value, abs=1e-9
        )
        # dual witness: q certifies the same value from the other side
        assert float(out.q @ p_hat) - float(np.max(out.q @ costs)) == pytest.approx(
            out.value, abs=1e-9
        )
        assert out.q.min() >= -1e-10
        assert out.q.sum() == pytest.approx(1.0, abs=1e-9)
