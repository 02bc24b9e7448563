"""Primal-dual interior point method for small convex QCQPs.

Problem form::

    min  c^T x
    s.t. G x <= h
         A x  = b
         0.5 x^T P_k x + q_k^T x + r_k <= 0      k = 1..K

This is exactly the shape of the fixed-binary l2 subproblem (epigraph rows
``0.5 ||w_r||^2 - Theta <= 0``) and of its integrality relaxation.  Dense
linear algebra, Mehrotra predictor-corrector steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class QCQPResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    z_lin: Optional[np.ndarray]
    z_quad: Optional[np.ndarray]
    y: Optional[np.ndarray]
    gap: float
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def solve_qcqp(c, G=None, h=None, A=None, b=None, quads=(), tol=1e-10, max_iter=200) -> QCQPResult:
    """Solve the QCQP; multipliers follow the Lagrangian ``c^T x + z^T F(x) + y^T (Ax - b)``.

    ``quads`` is a sequence of ``(P, q, r)``.  The returned ``gap`` is the
    complementarity ``s^T z``, i.e. primal minus Lagrangian dual value at the
    returned point.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    G = np.zeros((0, n)) if G is None else np.atleast_2d(np.asarray(G, float)).reshape(-1, n)
    h = np.zeros(0) if h is None else np.asarray(h, float)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, float)).reshape(-1, n)
    b = np.zeros(0) if b is None else np.asarray(b, float)
    Ps = [np.asarray(P, float) for P, _, _ in quads]
    qs = [np.asarray(q, float) for _, q, _ in quads]
    rs = np.array([float(r) for _, _, r in quads])
    nl, nq, ne = G.shape[0], len(Ps), A.shape[0]
    ni = nl + nq

    def F(x):
        quad = np.array([0.5 * x @ P @ x + q @ x + r for P, q, r in zip(Ps, qs, rs)])
        return np.concatenate([G @ x - h, quad])

    def jac(x):
        rows = [P @ x + q for P, q in zip(Ps, qs)]
        return np.vstack([G] + [np.atleast_2d(r) for r in rows]) if rows else G

    x = np.zeros(n)
    if ne:
        x = np.linalg.lstsq(A, b, rcond=None)[0]
    s = np.maximum(-F(x), 1.0)
    z = np.ones(ni)
    y = np.zeros(ne)
    scale = 1.0 + max(np.abs(c).max(initial=0), np.abs(h).max(initial=0), np.abs(b).max(initial=0))
    loose = max(tol, 1e-8)
    best = None

    for it in range(1, max_iter + 1):
        J = jac(x)
        Fx = F(x)
        H = sum((z[nl + k] * Ps[k] for k in range(nq)), np.zeros((n, n)))
        r_d = c + J.T @ z + A.T @ y
        r_e = A @ x - b
        r_i = Fx + s
        mu = s @ z / ni if ni else 0.0
        pres = max(np.abs(r_e).max(initial=0), np.abs(r_i).max(initial=0))
        dres = np.abs(r_d).max(initial=0)
        if pres <= tol * scale and dres <= tol * scale and s @ z <= tol * (1.0 + abs(c @ x)):
            return QCQPResult(OPTIMAL, x, float(c @ x), z[:nl].copy(), z[nl:].copy(), y.copy(),
                              float(s @ z), it)
        if pres <= loose * scale and dres <= loose * scale and s @ z <= loose * (1.0 + abs(c @ x)):
            if best is None or s @ z < best[4]:
                best = (x.copy(), z.copy(), y.copy(), float(c @ x), float(s @ z), it)
        if np.abs(x).max(initial=0) > 1e12 or np.abs(z).max(initial=0) > 1e14:
            break

        w = z / s
        Mxx = H + J.T @ (w[:, None] * J)
        K = np.zeros((n + ne, n + ne))
        K[:n, :n] = Mxx + 1e-13 * np.eye(n)
        K[:n, n:] = A.T
        K[n:, :n] = A
        K[n:, n:] = -1e-13 * np.eye(ne)

        def newton(r_c):
            # r_c = s*z - target; solves for (dx, dy, ds, dz)
            rhs_x = -r_d - J.T @ ((-r_c + z * r_i) / s)
            sol = _solve(K, np.concatenate([rhs_x, -r_e]), n)
            dx, dy = sol[:n], sol[n:]
            ds = -r_i - J @ dx
            dz = (-r_c - z * ds) / s
            return dx, dy, ds, dz

        # a singular system gives non-finite steps; the check below stops on them
        with np.errstate(all="ignore"):
            dx, dy, ds, dz = newton(s * z)
            a_aff = min(_max_step(s, ds), _max_step(z, dz))
            mu_aff = (s + a_aff * ds) @ (z + a_aff * dz) / ni
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dx, dy, ds, dz = newton(s * z + ds * dz - sigma * mu)
            alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
            if alpha < 1e-4:
                # the corrector can stall near the boundary; fall back on a centring step
                dx, dy, ds, dz = newton(s * z - 0.5 * mu)
                alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        if not np.isfinite(alpha) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))) or alpha < 1e-12 \
                or np.any(s <= 0) or np.any(z <= 0):
            break

    # stalled short of ``tol``: fall back on the best iterate accurate to 1e-8
    if best is not None:
        bx, bz, by, obj, comp, bit = best
        return QCQPResult(OPTIMAL, bx, obj, bz[:nl].copy(), bz[nl:].copy(), by, comp, bit)
    with np.errstate(all="ignore"):
        pres = np.abs(np.concatenate([F(x) + s, A @ x - b])).max(initial=0)
    status = ITERATION_LIMIT if np.isfinite(pres) and pres <= 1e-6 * scale else INFEASIBLE
    return QCQPResult(status, None, np.nan, None, None, None, np.inf, it)


def _solve(K, rhs, n):
    """Solve the KKT system, falling back on a shifted solve with iterative refinement.

    Degenerate problems (a hyperplane whose epigraph row is slack) make the
    x-block nearly singular.  A small proximal shift keeps the factorization
    stable and refinement against the unshifted matrix restores accuracy.
    """
    target = 1e-10 * (1.0 + np.abs(rhs).max(initial=0))
    best, best_res = None, np.inf
    try:
        sol = np.linalg.solve(K, rhs)
        best, best_res = sol, np.abs(K @ sol - rhs).max(initial=0)
    except (ValueError, np.linalg.LinAlgError):
        pass
    if best_res <= target:
        return best
    big = max(1.0, float(np.abs(np.diag(K)).max(initial=0)))
    idx_x, idx_y = np.arange(n), np.arange(n, K.shape[0])
    for shift in (1e-14, 1e-12, 1e-10):
        Kr = K.copy()
        Kr[idx_x, idx_x] += shift * big
        Kr[idx_y, idx_y] -= shift * big
        try:
            lu = scipy.linalg.lu_factor(Kr, check_finite=False)
        except (ValueError, np.linalg.LinAlgError):
            continue
        sol = np.zeros_like(rhs)
        for _ in range(10):
            sol = sol + scipy.linalg.lu_solve(lu, rhs - K @ sol, check_finite=False)
            res = np.abs(K @ sol - rhs).max(initial=0)
            if not np.isfinite(res):
                break
            if res < best_res:
                best, best_res = sol.copy(), res
            if res <= target:
                return best
    return best if best is not None else np.linalg.lstsq(K, rhs, rcond=None)[0]


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))
