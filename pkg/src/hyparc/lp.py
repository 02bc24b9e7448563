"""Dense bounded-variable simplex method.

Solves ``min c^T x  s.t.  A x (<=, >=, =) b,  lb <= x <= ub`` with a two-phase
primal simplex (Dantzig pricing, Bland's rule once degenerate pivots pile up)
and a dual simplex used to re-optimize after bound changes, which is what
branch-and-bound needs.  Each row ``i`` gets a slack ``s_i`` with
``A_i x + s_i = b_i``; the sense of the row is encoded in the slack bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL = "numerical"

AT_LB, AT_UB, FREE, BASIC = 0, 1, 2, 3


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    duals: Optional[np.ndarray]
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class BoundedSimplex:
    """Simplex engine holding a dense tableau so it can be warm started.

    Parameters
    ----------
    c : (n,) array
    A : (m, n) array
    b : (m,) array
    senses : sequence of 'L', 'G' or 'E'
    lb, ub : (n,) arrays, may contain -inf / inf
    """

    feas_tol = 1e-9
    opt_tol = 1e-9
    pivot_tol = 1e-9
    refactor_every = 150
    degenerate_switch = 25

    def __init__(self, c, A, b, senses, lb, ub, max_iter=50000):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.nrows, self.nx = A.shape if A.size else (0, len(c))
        if A.size == 0:
            A = np.zeros((0, len(c)))
        self.b = np.asarray(b, dtype=float).copy()
        slo = np.array([0.0 if s in "LE" else -np.inf for s in senses])
        shi = np.array([np.inf if s == "L" else 0.0 for s in senses])
        self.M = np.hstack([A, np.eye(self.nrows)])
        self.c_struct = np.asarray(c, dtype=float)
        self.lb = np.concatenate([np.asarray(lb, float), slo])
        self.ub = np.concatenate([np.asarray(ub, float), shi])
        self.ncols = self.M.shape[1]
        self.max_iter = max_iter
        self.basis = None
        self.status = None
        self.iterations = 0

    # ------------------------------------------------------------------ basis
    def _nonbasic_start(self, j):
        if np.isfinite(self.lb[j]):
            return AT_LB, self.lb[j]
        if np.isfinite(self.ub[j]):
            return AT_UB, self.ub[j]
        return FREE, 0.0

    def _refactor(self):
        B = self.M[:, self.basis]
        try:
            self.T = np.asfortranarray(np.linalg.solve(B, self.M))
        except np.linalg.LinAlgError:
            return False
        self._recompute_values()
        self._pivots_since_refactor = 0
        return True

    def _binv(self):
        # the slack block of M is the identity, so this block of T is B^-1
        return self.T[:, self.nx:self.nx + self.nrows]

    def _recompute_values(self):
        nb = self.state != BASIC
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = self._binv() @ rhs

    def _reduced_costs(self, cost):
        self.d = cost - cost[self.basis] @ self.T
        self.d[self.basis] = 0.0

    def get_basis(self):
        return (np.array(self.basis), self.state.copy())

    def set_basis(self, basis):
        idx, state = basis
        self.basis = np.array(idx)
        self.state = state.copy()
        self.x = np.zeros(self.ncols)
        for j in np.flatnonzero(self.state != BASIC):
            self._place_nonbasic(j)
        return self._refactor()

    def _place_nonbasic(self, j):
        st = self.state[j]
        lo, hi = self.lb[j], self.ub[j]
        if st == AT_LB and not np.isfinite(lo):
            st = AT_UB if np.isfinite(hi) else FREE
        if st == AT_UB and not np.isfinite(hi):
            st = AT_LB if np.isfinite(lo) else FREE
        if st == FREE and (np.isfinite(lo) or np.isfinite(hi)):
            st = AT_LB if np.isfinite(lo) else AT_UB
        self.state[j] = st
        self.x[j] = lo if st == AT_LB else hi if st == AT_UB else 0.0

    def set_bounds(self, lb, ub):
        """Replace structural bounds; nonbasic columns are moved to the new bounds."""
        self.lb[: self.nx] = lb
        self.ub[: self.nx] = ub
        if self.basis is not None:
            # boxed columns go to the side their reduced cost prefers, which
            # keeps the basis dual feasible when a fixed column is released
            self._reduced_costs(self._cost())
            for j in np.flatnonzero(self.state[: self.nx] != BASIC):
                if np.isfinite(self.lb[j]) and np.isfinite(self.ub[j]) and self.lb[j] < self.ub[j]:
                    self.state[j] = AT_UB if self.d[j] < 0 else AT_LB
                self._place_nonbasic(j)
            self._recompute_values()

    # ----------------------------------------------------------------- pivots
    def _pivot(self, r, q):
        col = self.T[:, q].copy()
        piv = col[r]
        self.T[r] /= piv
        col[r] = 0.0
        # in-place rank-one update (BLAS ger) on the Fortran-ordered tableau
        self.T = dger(-1.0, col, self.T[r].copy(), a=self.T, overwrite_a=1)
        leaving = self.basis[r]
        self.basis[r] = q
        self.state[q] = BASIC
        self._pivots_since_refactor += 1
        return leaving

    def _infeasibility(self):
        xb = self.x[self.basis]
        lo = self.lb[self.basis] - xb
        hi = xb - self.ub[self.basis]
        return np.maximum(np.maximum(lo, hi), 0.0)

    def _primal(self, cost):
        """Primal simplex from a primal feasible basis."""
        self._reduced_costs(cost)
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            if self._pivots_since_refactor >= self.refactor_every:
                if not self._refactor():
                    return NUMERICAL
                self._reduced_costs(cost)
            d = self.d
            st = self.state
            elig = ((st == AT_LB) & (d < -self.opt_tol)) | ((st == AT_UB) & (d > self.opt_tol)) \
                | ((st == FREE) & (np.abs(d) > self.opt_tol))
            elig &= self.lb < self.ub
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return OPTIMAL
            if degenerate >= self.degenerate_switch:
                q = cand[0]
            else:
                q = cand[np.argmax(np.abs(d[cand]))]
            direction = -1.0 if (st[q] == AT_UB or (st[q] == FREE and d[q] > 0)) else 1.0
            # basic variables move by -direction * T[:, q] per unit step
            rate = -direction * self.T[:, q]
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            step = np.full(self.nrows, np.inf)
            dec = rate < -self.pivot_tol
            inc = rate > self.pivot_tol
            step[dec] = (xb[dec] - lbb[dec]) / -rate[dec]
            step[inc] = (ubb[inc] - xb[inc]) / rate[inc]
            step = np.maximum(step, 0.0)
            flip = self.ub[q] - self.lb[q]
            theta = step.min() if self.nrows else np.inf
            if flip <= theta:
                if not np.isfinite(flip):
                    return UNBOUNDED
                self.x[q] += direction * flip
                self.x[self.basis] += flip * rate
                self.state[q] = AT_UB if direction > 0 else AT_LB
                degenerate = 0
                self.iterations += 1
                continue
            if not np.isfinite(theta):
                return UNBOUNDED
            ties = np.flatnonzero(step <= theta + 1e-12)
            if degenerate >= self.degenerate_switch:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(np.abs(rate[ties]))]
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            self.x[q] += direction * theta
            self.x[self.basis] += theta * rate
            leaving_up = rate[r] > 0
            leaving = self._pivot(r, q)
            self.state[leaving] = AT_UB if leaving_up else AT_LB
            self.x[leaving] = self.ub[leaving] if leaving_up else self.lb[leaving]
            self.d = self.d - self.d[q] * self.T[r]
            self.d[self.basis] = 0.0
            self.iterations += 1

    def _dual(self, cost):
        """Dual simplex from a dual feasible basis.

        Rows are priced by dual steepest edge (exact weights: the slack block
        of the tableau is B^-1) and the ratio test flips boxed columns past
        their breakpoints while the dual objective keeps improving.
        """
        self._reduced_costs(cost)
        stall = 0
        slack = slice(self.nx, self.nx + self.nrows)
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            if self._pivots_since_refactor >= self.refactor_every:
                if not self._refactor():
                    return NUMERICAL
                self._reduced_costs(cost)
            infeas = self._infeasibility()
            if self.nrows == 0 or infeas.max() <= self.feas_tol:
                return OPTIMAL
            if stall >= self.degenerate_switch:
                viol = np.flatnonzero(infeas > self.feas_tol)
                r = viol[np.argmin(self.basis[viol])]
            else:
                weights = np.einsum("ij,ij->i", self.T[:, slack], self.T[:, slack])
                r = int(np.argmax(infeas ** 2 / np.maximum(weights, 1e-12)))
            j_out = self.basis[r]
            below = self.x[j_out] < self.lb[j_out]
            row = self.T[r]
            st = self.state
            # x_out = beta - sum_j row_j (x_j - xbar_j); need x_out up if below
            if below:
                ok = ((st == AT_LB) & (row < -self.pivot_tol)) | ((st == AT_UB) & (row > self.pivot_tol))
            else:
                ok = ((st == AT_LB) & (row > self.pivot_tol)) | ((st == AT_UB) & (row < -self.pivot_tol))
            ok |= (st == FREE) & (np.abs(row) > self.pivot_tol)
            ok &= self.lb < self.ub
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return INFEASIBLE
            arow = np.abs(row[cand])
            ratios = np.abs(self.d[cand]) / arow
            if stall >= self.degenerate_switch:
                order = np.lexsort((cand, ratios))
            else:
                order = np.lexsort((-arow, ratios))
            slope = infeas[r]
            flips = []
            q = None
            for pos in order:
                j = cand[pos]
                width = self.ub[j] - self.lb[j]
                drop = arow[pos] * width
                if np.isfinite(width) and slope - drop > self.feas_tol:
                    flips.append(j)
                    slope -= drop
                    continue
                q = j
                best = ratios[pos]
                break
            if q is None:
                return INFEASIBLE
            if flips:
                flips = np.array(flips)
                to_ub = st[flips] == AT_LB
                delta = np.where(to_ub, self.ub[flips] - self.lb[flips], self.lb[flips] - self.ub[flips])
                self.x[self.basis] -= self.T[:, flips] @ delta
                self.x[flips] += delta
                st[flips] = np.where(to_ub, AT_UB, AT_LB)
            stall = stall + 1 if best <= 1e-12 else 0
            target = self.lb[j_out] if below else self.ub[j_out]
            delta_out = target - self.x[j_out]
            dq = -delta_out / row[q]
            self.x[self.basis] -= dq * self.T[:, q]
            self.x[q] += dq
            leaving = self._pivot(r, q)
            self.state[leaving] = AT_LB if below else AT_UB
            self.x[leaving] = target
            self.d = self.d - self.d[q] * self.T[r]
            self.d[self.basis] = 0.0
            self.iterations += 1

    # ------------------------------------------------------------------- api
    def solve(self) -> LPResult:
        """Cold two-phase solve from the slack basis."""
        self.iterations = 0
        if np.any(self.lb > self.ub + self.feas_tol):
            return self._result(INFEASIBLE)
        n = self.ncols
        self.state = np.full(n, AT_LB)
        self.x = np.zeros(n)
        for j in range(self.nx):
            self.state[j] = AT_LB
            self._place_nonbasic(j)
        slack0 = self.nx
        resid = self.b - self.M[:, : self.nx] @ self.x[: self.nx]
        lo, hi = self.lb[slack0:], self.ub[slack0:]
        clipped = np.clip(resid, lo, hi)
        viol = resid - clipped
        need = np.flatnonzero(np.abs(viol) > self.feas_tol)
        self.basis = np.arange(slack0, slack0 + self.nrows)
        self.state[self.basis] = BASIC
        self.x[self.basis] = resid
        self.n_art = need.size
        if need.size:
            art = np.zeros((self.nrows, need.size))
            art[need, np.arange(need.size)] = np.sign(viol[need])
            self.M = np.hstack([self.M, art])
            self.lb = np.concatenate([self.lb, np.zeros(need.size)])
            self.ub = np.concatenate([self.ub, np.full(need.size, np.inf)])
            self.state = np.concatenate([self.state, np.full(need.size, BASIC)])
            self.x = np.concatenate([self.x, np.abs(viol[need])])
            self.ncols = self.M.shape[1]
            for a, i in enumerate(need):
                s = slack0 + i
                self.state[s] = AT_LB if clipped[i] == lo[i] else AT_UB
                self.x[s] = clipped[i]
                self.basis[i] = n + a
            if not self._refactor():
                return self._result(NUMERICAL)
            phase1 = np.zeros(self.ncols)
            phase1[n:] = 1.0
            st = self._primal(phase1)
            if st != OPTIMAL:
                return self._result(st)
            if self.x[n:].sum() > 1e-7:
                return self._result(INFEASIBLE)
            self.ub[n:] = 0.0
            self.x[n:] = np.where(self.state[n:] == BASIC, self.x[n:], 0.0)
            self._drive_out_artificials(n)
        else:
            if not self._refactor():
                return self._result(NUMERICAL)
        return self._result(self._primal(self._cost()))

    def _drive_out_artificials(self, first_art):
        for r in range(self.nrows):
            j = self.basis[r]
            if j < first_art:
                continue
            row = self.T[r, :first_art]
            nb = np.flatnonzero((self.state[:first_art] != BASIC) & (np.abs(row) > 1e-7))
            if nb.size:
                q = nb[np.argmax(np.abs(row[nb]))]
                leaving = self._pivot(r, q)
                self.state[leaving] = AT_LB
                self.x[leaving] = 0.0
        self._refactor()

    def _cost(self):
        cost = np.zeros(self.ncols)
        cost[: self.nx] = self.c_struct
        return cost

    def resolve(self) -> LPResult:
        """Re-optimize after :meth:`set_bounds` from the current basis."""
        self.iterations = 0
        if np.any(self.lb > self.ub + self.feas_tol):
            return self._result(INFEASIBLE)
        cost = self._cost()
        self._reduced_costs(cost)
        st = self.state
        dual_infeasible = ((st == AT_LB) & (self.d < -1e-7) & (self.lb < self.ub)) | \
            ((st == AT_UB) & (self.d > 1e-7) & (self.lb < self.ub)) | \
            ((st == FREE) & (np.abs(self.d) > 1e-7))
        if np.any(dual_infeasible):
            if self._infeasibility().max() <= self.feas_tol:
                return self._result(self._primal(cost))
            return self.solve_fresh()
        status = self._dual(cost)
        if status == OPTIMAL:
            # polish: the dual simplex leaves a primal feasible optimal basis
            status = self._primal(cost)
        return self._result(status)

    def solve_fresh(self) -> LPResult:
        lb, ub = self.lb[: self.nx].copy(), self.ub[: self.nx].copy()
        n0 = self.nx + self.nrows
        self.M = self.M[:, :n0]
        self.lb, self.ub = self.lb[:n0], self.ub[:n0]
        self.lb[: self.nx], self.ub[: self.nx] = lb, ub
        self.ncols = n0
        return self.solve()

    def _result(self, status) -> LPResult:
        self.status = status
        if status != OPTIMAL:
            return LPResult(status, None, np.nan, None, self.iterations)
        x = self.x[: self.nx].copy()
        y = self._binv().T @ self._cost()[self.basis] if self.nrows else np.zeros(0)
        return LPResult(OPTIMAL, x, float(self.c_struct @ x), y, self.iterations)


def solve_lp(c, A, b, senses, lb=None, ub=None, max_iter=50000) -> LPResult:
    """One-shot LP solve.

    ``duals`` are the row prices ``y`` with ``c - A^T y`` the reduced costs,
    so ``y_i <= 0`` on binding ``<=`` rows and ``y_i >= 0`` on binding ``>=``
    rows of a minimization.
    """
    n = len(c)
    lb = np.zeros(n) if lb is None else np.asarray(lb, float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, float)
    return BoundedSimplex(c, A, b, senses, lb, ub, max_iter=max_iter).solve()
