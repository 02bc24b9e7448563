import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyparc.convex import solve_qcqp

cp = pytest.importorskip("cvxpy")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_min_max_norm_against_cvxpy(seed):
    # min theta + sum(slack) s.t. theta >= 0.5|w_r|^2, y_i (w_r x_i + b_r) >= 1 - slack_i
    rng = np.random.default_rng(seed)
    n, p, m = int(rng.integers(3, 8)), 2, int(rng.integers(1, 3))
    X = rng.normal(size=(n, p))
    y = rng.choice([-1.0, 1.0], size=n)
    nv = m * (p + 1) + 1 + n
    c = np.zeros(nv)
    c[m * (p + 1)] = 1.0
    c[m * (p + 1) + 1:] = 1.0
    G, h = [], []
    for r in range(m):
        for i in range(n):
            row = np.zeros(nv)
            row[r * (p + 1): r * (p + 1) + p] = -y[i] * X[i]
            row[r * (p + 1) + p] = -y[i]
            row[m * (p + 1) + 1 + i] = -1.0
            G.append(row)
            h.append(-1.0)
    for i in range(n):
        row = np.zeros(nv)
        row[m * (p + 1) + 1 + i] = -1.0
        G.append(row)
        h.append(0.0)
    quads = []
    for r in range(m):
        P = np.zeros((nv, nv))
        idx = np.arange(r * (p + 1), r * (p + 1) + p)
        P[idx, idx] = 1.0
        q = np.zeros(nv)
        q[m * (p + 1)] = -1.0
        quads.append((P, q, 0.0))
    res = solve_qcqp(c, np.array(G), np.array(h), quads=quads)
    assert res.ok

    v = cp.Variable(nv)
    cons = [np.array(G) @ v <= np.array(h)]
    for r in range(m):
        w = v[r * (p + 1): r * (p + 1) + p]
        cons.append(0.5 * cp.sum_squares(w) <= v[m * (p + 1)])
    prob = cp.Problem(cp.Minimize(c @ v), cons)
    prob.solve()
    assert res.objective == pytest.approx(prob.value, abs=1e-5, rel=1e-5)
    assert res.gap <= 1e-7


def test_multipliers_satisfy_stationarity():
    # min x0 + x1 s.t. 0.5|x|^2 - 1 <= 0 : x = (-1, -1), optimum -2, multiplier 1
    c = np.array([1.0, 1.0])
    res = solve_qcqp(c, quads=[(np.eye(2), np.zeros(2), -1.0)])
    assert res.ok
    assert res.objective == pytest.approx(-2.0, abs=1e-8)
    assert res.z_quad[0] == pytest.approx(1.0, abs=1e-7)
    lam = res.z_quad[0]
    assert c + lam * res.x == pytest.approx(np.zeros(2), abs=1e-8)


def test_equality_rows():
    res = solve_qcqp(np.array([1.0, 2.0]), G=-np.eye(2), h=np.zeros(2), A=np.array([[1.0, 1.0]]), b=np.array([1.0]))
    assert res.ok
    assert res.x == pytest.approx([1.0, 0.0], abs=1e-7)
