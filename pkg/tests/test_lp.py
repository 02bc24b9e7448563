import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from hyparc.lp import BoundedSimplex, INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp


def _highs(c, A, b, senses, lb, ub):
    le = [i for i, s in enumerate(senses) if s == "L"]
    ge = [i for i, s in enumerate(senses) if s == "G"]
    eq = [i for i, s in enumerate(senses) if s == "E"]
    A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([b[le], -b[ge]]) if le or ge else None
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in zip(lb, ub)]
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq else None, b_eq=b[eq] if eq else None,
                   bounds=bounds, method="highs")


@st.composite
def lps(draw):
    seed = draw(st.integers(0, 10 ** 6))
    rng = np.random.default_rng(seed)
    m, n = draw(st.integers(1, 6)), draw(st.integers(1, 7))
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    b = rng.integers(-4, 6, size=m).astype(float)
    c = rng.integers(-3, 4, size=n).astype(float)
    senses = list(rng.choice(["L", "G", "E"], size=m, p=[0.5, 0.3, 0.2]))
    lb = np.where(rng.random(n) < 0.2, -np.inf, rng.integers(-2, 1, n).astype(float))
    ub = np.where(rng.random(n) < 0.3, np.inf, lb + rng.integers(0, 4, n))
    ub = np.where(np.isinf(lb) & np.isinf(ub), np.inf, np.where(np.isinf(lb), rng.integers(0, 3, n), ub))
    return c, A, b, senses, lb, ub


@settings(max_examples=150, deadline=None)
@given(lps())
def test_simplex_agrees_with_highs(problem):
    c, A, b, senses, lb, ub = problem
    ref = _highs(c, A, b, senses, lb, ub)
    res = solve_lp(c, A, b, senses, lb, ub)
    if ref.status == 2:
        assert res.status == INFEASIBLE
    elif ref.status == 3:
        assert res.status == UNBOUNDED
    else:
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)
        x = res.x
        assert np.all(x >= lb - 1e-7) and np.all(x <= ub + 1e-7)
        Ax = A @ x
        for i, s in enumerate(senses):
            if s == "L":
                assert Ax[i] <= b[i] + 1e-7
            elif s == "G":
                assert Ax[i] >= b[i] - 1e-7
            else:
                assert Ax[i] == pytest.approx(b[i], abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(lps())
def test_dual_prices_certify_optimum(problem):
    # weak duality made tight: b^T y plus the bound terms of the reduced costs
    c, A, b, senses, lb, ub = problem
    res = solve_lp(c, A, b, senses, lb, ub)
    if not res.ok:
        return
    y = res.duals
    rc = c - A.T @ y
    with np.errstate(invalid="ignore"):
        bound_terms = np.where(rc > 0, rc * lb, rc * ub)
    bound_terms = np.where(np.abs(rc) <= 1e-9, 0.0, bound_terms)
    assert np.all(np.isfinite(bound_terms))
    assert b @ y + bound_terms.sum() == pytest.approx(res.objective, abs=1e-6)


def test_warm_resolve_after_bound_change():
    c = np.array([-1.0, -1.0])
    A = np.array([[1.0, 2.0], [3.0, 1.0]])
    b = np.array([4.0, 6.0])
    lp = BoundedSimplex(c, A, b, "LL", np.zeros(2), np.full(2, np.inf))
    first = lp.solve()
    assert first.objective == pytest.approx(-2.8)
    lp.set_bounds(np.zeros(2), np.array([1.0, np.inf]))
    again = lp.resolve()
    assert again.objective == pytest.approx(-2.5)
    assert again.objective == pytest.approx(lp.solve_fresh().objective)


def test_infeasible_bounds():
    res = solve_lp([1.0], np.zeros((0, 1)), np.zeros(0), "", [2.0], [1.0])
    assert res.status == INFEASIBLE
