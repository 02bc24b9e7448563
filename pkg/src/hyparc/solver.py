"""Exact and heuristic solvers for the arrangement models.

* :func:`eval_phi` solves the continuous problem left once all binaries are
  fixed (an LP for the l1 margin, a QCQP for the l2 margin).
* :func:`branch_and_bound` solves a :class:`~hyparc.formulation.MipModel`.
* :func:`brute_force` enumerates sign patterns and class maps on tiny
  instances; it is used as an independent oracle.
* :func:`local_search` improves a feasible set of binaries by single moves.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .convex import solve_qcqp
from .core import Dataset, Hyperparameters
from .formulation import MipModel, VariableLayout, build_model, estimate_big_m, validate_solution
from .lp import BoundedSimplex

log = logging.getLogger("hyparc.solver")

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
LIMIT = "limit"


class InfeasibleBinariesError(ValueError):
    pass


class GuardError(ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    time_limit: float = 300.0
    gap_abs: float = 1e-7
    gap_rel: float = 1e-9
    node_limit: int = 1_000_000
    branching: str = "priority"
    seed: int = 0
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    symmetry: bool = True
    plunge: bool = True
    log_every: int = 0
    max_passes: int = 50

    def __post_init__(self):
        for name in ("gap_abs", "feas_tol", "opt_tol", "time_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gap_rel < 0:
            raise ValueError("gap_rel must be nonnegative")
        if self.branching not in ("priority", "fractional"):
            raise ValueError("branching must be 'priority' or 'fractional'")


@dataclass(frozen=True, eq=False)
class Binaries:
    """Fixed values of t (n, m), z (n, k), h (n, n) and xi (n,)."""

    t: np.ndarray
    z: np.ndarray
    h: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        for name in ("t", "z", "h", "xi"):
            arr = np.asarray(np.rint(getattr(self, name)), dtype=int)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def classes(self) -> np.ndarray:
        """Assigned class (1-based) of every observation."""
        return np.argmax(self.z, axis=1) + 1

    @property
    def representative(self) -> np.ndarray:
        return np.argmax(self.h, axis=1)

    def key(self):
        return (self.t.tobytes(), self.z.tobytes(), self.h.tobytes())

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "z": self.classes.tolist(), "rep": self.representative.tolist()}

    @classmethod
    def from_dict(cls, doc: dict, labels, k: int) -> "Binaries":
        """Inverse of :meth:`to_dict`; ``labels`` are the 1-based training labels."""
        t = np.asarray(doc["t"], dtype=int)
        classes = np.asarray(doc["z"], dtype=int)
        rep = np.asarray(doc["rep"], dtype=int)
        n = t.shape[0]
        z = np.zeros((n, k), dtype=int)
        z[np.arange(n), classes - 1] = 1
        h = np.zeros((n, n), dtype=int)
        h[np.arange(n), rep] = 1
        return cls(t, z, h, (classes != np.asarray(labels)).astype(int))


def complete_assignment(dataset: Dataset, t, classes, rep=None) -> Binaries:
    """Binaries from sign indicators, assigned classes and (optional) representatives.

    Well-classified observations represent themselves.  A wrong-classified
    observation without a usable ``rep`` entry gets the nearest (Euclidean)
    well-classified observation of its own class.
    """
    t = np.asarray(t, dtype=int)
    cls = np.asarray(classes, dtype=int)
    n, k = dataset.n, dataset.k
    y = dataset.labels
    z = np.zeros((n, k), dtype=int)
    z[np.arange(n), cls - 1] = 1
    xi = (cls != y).astype(int)
    h = np.zeros((n, n), dtype=int)
    X = dataset.points
    for i in range(n):
        if not xi[i]:
            h[i, i] = 1
            continue
        ok = np.flatnonzero((y == y[i]) & (xi == 0))
        if ok.size == 0:
            raise InfeasibleBinariesError(f"class {y[i]} has no well-classified observation")
        j = None if rep is None else int(rep[i])
        if j is None or j not in set(ok.tolist()):
            dist = np.sum((X[ok] - X[i]) ** 2, axis=1)
            j = int(ok[np.argmin(dist)])
        h[i, j] = 1
    return Binaries(t, z, h, xi)


def check_binaries(dataset: Dataset, b: Binaries, m: Optional[int] = None) -> None:
    """Raise :class:`InfeasibleBinariesError` unless (q2), (q3), (q6), (q7), (q7a) and xi hold."""
    n, k = dataset.n, dataset.k
    y = dataset.labels - 1
    if b.t.shape[0] != n or (m is not None and b.t.shape[1] != m):
        raise InfeasibleBinariesError("t has the wrong shape")
    if b.z.shape != (n, k) or b.h.shape != (n, n) or b.xi.shape != (n,):
        raise InfeasibleBinariesError("binaries have the wrong shape")
    if np.any(b.z.sum(axis=1) != 1):
        raise InfeasibleBinariesError("q2: every observation needs exactly one class")
    if np.any(b.xi != 1 - b.z[np.arange(n), y]):
        raise InfeasibleBinariesError("xi must equal 1 - z[i, y_i]")
    for i in range(n):
        for j in range(i + 1, n):
            if np.abs(b.z[i] - b.z[j]).sum() > 2 * np.abs(b.t[i] - b.t[j]).sum():
                raise InfeasibleBinariesError(f"q3: observations {i} and {j} share a cell but not a class")
    if np.any(b.h[y[:, None] != y[None, :]]):
        raise InfeasibleBinariesError("h links observations of different classes")
    if np.any(b.h.sum(axis=1) != 1):
        raise InfeasibleBinariesError("q6: every observation needs one representative")
    if np.any(b.h + b.xi[None, :] > 1 + np.eye(n, dtype=int)):
        raise InfeasibleBinariesError("q7: representatives must be well classified")
    if np.any(np.diag(b.h) != 1 - b.xi):
        raise InfeasibleBinariesError("q7a: h_ii must equal 1 - xi_i")


# ---------------------------------------------------------------- Eval_Phi
@dataclass
class PhiResult:
    value: float
    omega: np.ndarray
    omega0: np.ndarray
    theta: float
    e: np.ndarray
    d: np.ndarray
    status: str
    T: float
    rows: list = field(default_factory=list)
    multipliers: Optional[np.ndarray] = None
    quad_multipliers: Optional[np.ndarray] = None
    gap: float = 0.0
    big_m_flag: bool = False

    @property
    def affine(self):
        return None


def _phi_problem(dataset: Dataset, params: Hyperparameters, b: Binaries, T: float):
    """Continuous problem for fixed binaries as ``min c'x, G x <= g``.

    Columns: omega (m*p), omega0 (m), theta, e (n*m), d (n*m, hinge only).
    Identical big-M rows for different partners j collapse into one row per
    (family, i, r); rows whose switch value is 2 or more are implied by the
    sign rows and dropped.  ``rows`` describes every kept row as
    ``(family, i, r, j, switch)``.
    """
    X, y = dataset.points, dataset.labels
    n, p, m = dataset.n, dataset.p, params.m
    hinge = params.loss == "hinge"
    nw = m * p
    c_w0, c_th, c_e = nw, nw + m, nw + m + 1
    c_d = c_e + n * m
    nv = c_d + (n * m if hinge else 0)
    t, h = b.t, b.h
    G, g, rows = [], [], []

    def f_row(i, r, sign):
        row = np.zeros(nv)
        row[r * p:(r + 1) * p] = sign * X[i]
        row[c_w0 + r] = sign
        return row

    for i in range(n):
        for r in range(m):
            G.append(-f_row(i, r, 1.0))
            g.append(T * (1 - t[i, r]))
            rows.append(("t+", i, r, None, None))
            G.append(f_row(i, r, 1.0))
            g.append(T * t[i, r])
            rows.append(("t-", i, r, None, None))
    for i in range(n):
        same = np.flatnonzero(y == y[i])
        for r in range(m):
            ie, idd = c_e + i * m + r, c_d + i * m + r
            fams = [("q4", 3 - t[i, r] - t[same, r] - h[i, same], same)]
            fams.append(("q5", 1 + t[i, r] + t[same, r] - h[i, same], same))
            if hinge:
                other = same[same != i]
                fams.append(("q8", 2 + t[i, r] - t[other, r] - h[i, other], other))
                fams.append(("q9", 2 - t[i, r] + t[other, r] - h[i, other], other))
            for fam, sw, js in fams:
                if js.size == 0:
                    continue
                a = int(np.argmin(sw))
                if sw[a] >= 2:
                    continue
                if fam == "q4":
                    row = -f_row(i, r, 1.0)
                    row[ie] = -1.0
                elif fam == "q5":
                    row = f_row(i, r, 1.0)
                    row[ie] = -1.0
                elif fam == "q8":
                    row = -f_row(i, r, 1.0)
                    row[idd] = -1.0
                else:
                    row = f_row(i, r, 1.0)
                    row[idd] = -1.0
                G.append(row)
                g.append(-1.0 + T * sw[a])
                rows.append((fam, i, r, int(js[a]), int(sw[a])))
    c = np.zeros(nv)
    c[c_th] = 1.0
    c[c_e:c_e + n * m] = params.C1
    if hinge:
        c[c_d:] = params.C2
    layout = {"nw": nw, "w0": c_w0, "theta": c_th, "e": c_e, "d": c_d, "nv": nv}
    return c, np.array(G), np.array(g), rows, layout


def eval_phi(dataset: Dataset, params: Hyperparameters, binaries: Binaries, T: Optional[float] = None,
             engine: str = "bundled", check: bool = True, tol: float = 1e-10) -> PhiResult:
    """Value of the model with all binaries fixed, plus optimal hyperplanes and errors.

    ``engine`` selects the LP solver for the l1 margin: the bundled simplex
    or HiGHS (through :func:`scipy.optimize.linprog`).  The l2 margin always
    uses the bundled interior point method.
    """
    if check:
        check_binaries(dataset, binaries, params.m)
    T = estimate_big_m(dataset, params) if T is None else float(T)
    c, G, g, rows, L = _phi_problem(dataset, params, binaries, T)
    n, p, m = dataset.n, dataset.p, params.m
    nv, nw = L["nv"], L["nw"]
    hinge = params.loss == "hinge"
    const = 0.0 if hinge else params.C2 * float(binaries.xi.sum())
    ne = n * m * (2 if hinge else 1)
    mult = quad = None
    gap = 0.0
    if params.norm == "l1":
        # theta >= |omega_rj|
        extra = np.zeros((2 * nw, nv))
        for q in range(nw):
            extra[2 * q, q], extra[2 * q, L["theta"]] = 1.0, -1.0
            extra[2 * q + 1, q], extra[2 * q + 1, L["theta"]] = -1.0, -1.0
        A = np.vstack([G, extra])
        rhs = np.concatenate([g, np.zeros(2 * nw)])
        lb = np.concatenate([np.full(nw + m, -np.inf), np.zeros(1 + ne)])
        ub = np.full(nv, np.inf)
        if engine == "highs":
            res = linprog(c, A_ub=A, b_ub=rhs, bounds=list(zip(lb, [None] * nv)), method="highs")
            if res.status != 0:
                raise RuntimeError(f"HiGHS failed on the fixed-binary LP: {res.message}")
            x, status = res.x, OPTIMAL
            mult = -res.ineqlin.marginals
        elif engine == "bundled":
            res = BoundedSimplex(c, A, rhs, "L" * A.shape[0], lb, ub).solve()
            if not res.ok:
                raise RuntimeError(f"simplex failed on the fixed-binary LP: {res.status}")
            x, status = res.x, OPTIMAL
            mult = -res.duals
        else:
            raise ValueError(f"unknown engine {engine!r}")
    else:
        # nonnegativity of theta, e, d as explicit rows so their multipliers are reported
        nn = np.zeros((1 + ne, nv))
        nn[np.arange(1 + ne), L["theta"] + np.arange(1 + ne)] = -1.0
        A = np.vstack([G, nn])
        rhs = np.concatenate([g, np.zeros(1 + ne)])
        quads = []
        for r in range(m):
            P = np.zeros((nv, nv))
            idx = np.arange(r * p, (r + 1) * p)
            P[idx, idx] = 1.0
            q = np.zeros(nv)
            q[L["theta"]] = -1.0
            quads.append((P, q, 0.0))
        res = solve_qcqp(c, A, rhs, quads=quads, tol=tol)
        if not res.ok:
            raise RuntimeError(f"interior point method failed on the fixed-binary problem: {res.status}")
        x, status = res.x, OPTIMAL
        mult, quad, gap = res.z_lin, res.z_quad, res.gap
        if gap > 1e-8 * max(1.0, abs(res.objective)):
            raise RuntimeError(f"duality gap {gap:.2e} above 1e-8")
    omega = x[:nw].reshape(m, p)
    omega0 = x[L["w0"]:L["w0"] + m]
    e = np.maximum(x[L["e"]:L["e"] + n * m].reshape(n, m), 0.0)
    d = np.maximum(x[L["d"]:L["d"] + n * m].reshape(n, m), 0.0) if hinge else np.zeros((n, m))
    if params.norm == "l1":
        theta = float(np.max(np.abs(omega)))
    else:
        theta = float(np.max(0.5 * np.sum(omega ** 2, axis=1)))
    value = theta + params.C1 * float(e.sum()) + params.C2 * float(d.sum()) + const
    vals = dataset.points @ omega.T + omega0
    flag = bool(np.max(np.abs(vals)) >= T - 1.0 - 1e-6)
    return PhiResult(value, omega, omega0, theta, e, d, status, T, rows, mult, quad, gap, flag)


# ------------------------------------------------------------ solutions
@dataclass(frozen=True, eq=False)
class Solution:
    binaries: Optional[Binaries]
    omega: Optional[np.ndarray]
    omega0: Optional[np.ndarray]
    e: Optional[np.ndarray]
    d: Optional[np.ndarray]
    objective: float
    bound: float
    status: str
    nodes: int = 0
    wall_time: float = 0.0
    x: Optional[np.ndarray] = None
    T: Optional[float] = None
    big_m_flag: bool = False
    info: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        if not np.isfinite(self.objective):
            return math.inf
        return max(0.0, self.objective - self.bound)

    @property
    def has_incumbent(self) -> bool:
        return self.binaries is not None


def assemble(model: MipModel, binaries: Binaries, phi: PhiResult) -> np.ndarray:
    """Full model vector from binaries and a fixed-binary optimum."""
    lay = model.layout
    x = np.zeros(model.n_cols)
    idx = lay.index
    for r in range(lay.m):
        for j in range(lay.p):
            w = phi.omega[r, j]
            if lay.norm == "l2":
                x[idx[("w", r, j)]] = w
            else:
                x[idx[("w+", r, j)]] = max(w, 0.0)
                x[idx[("w-", r, j)]] = max(-w, 0.0)
        x[idx[("w0", r)]] = phi.omega0[r]
    x[idx[("theta",)]] = phi.theta
    t, z, h, xi = binaries.t, binaries.z, binaries.h, binaries.xi
    for key, c in idx.items():
        kind = key[0]
        if kind == "e":
            x[c] = phi.e[key[1], key[2]]
        elif kind == "d":
            x[c] = phi.d[key[1], key[2]]
        elif kind == "t":
            x[c] = t[key[1], key[2]]
        elif kind == "z":
            x[c] = z[key[1], key[2]]
        elif kind == "h":
            x[c] = h[key[1], key[2]]
        elif kind == "xi":
            x[c] = xi[key[1]]
        elif kind == "v":
            x[c] = abs(t[key[1], key[3]] - t[key[2], key[3]])
        elif kind == "u":
            x[c] = abs(z[key[1], key[3]] - z[key[2], key[3]])
    return x


def binaries_from_x(layout: VariableLayout, x) -> Binaries:
    n, m, k = layout.n, layout.m, layout.k
    return Binaries(layout.matrix(x, "t", (n, m)), layout.matrix(x, "z", (n, k)),
                    layout.matrix(x, "h", (n, n)), layout.matrix(x, "xi", (n,)))


def solution_from_phi(binaries, phi: PhiResult, status=FEASIBLE, model: Optional[MipModel] = None,
                      **kw) -> Solution:
    x = assemble(model, binaries, phi) if model is not None else None
    return Solution(binaries, phi.omega, phi.omega0, phi.e, phi.d, phi.value, kw.pop("bound", -math.inf),
                    status, x=x, T=phi.T, big_m_flag=phi.big_m_flag, **kw)


def solution_from_x(model: MipModel, x, objective, bound, status, nodes=0, wall=0.0) -> Solution:
    lay = model.layout
    b = binaries_from_x(lay, x)
    e = lay.matrix(x, "e", (lay.n, lay.m))
    d = lay.matrix(x, "d", (lay.n, lay.m))
    rep = validate_solution(model, x)
    return Solution(b, lay.omega_value(x), lay.omega0_value(x), e, d, float(objective), float(bound), status,
                    nodes, wall, np.asarray(x, float), model.T, rep.big_m_flag)


# ---------------------------------------------------------- branch and bound
def _priority(layout: VariableLayout) -> np.ndarray:
    pri = np.full(len(layout.names), 3)
    order = {"h": 0, "t": 1, "z": 2, "xi": 2}
    for key, c in layout.index.items():
        if key[0] in order:
            pri[c] = order[key[0]]
    return pri


def _flip_hyperplane(layout: VariableLayout, x, r):
    x = x.copy()
    idx = layout.index
    for j in range(layout.p):
        if layout.norm == "l2":
            x[idx[("w", r, j)]] *= -1
        else:
            a, b = idx[("w+", r, j)], idx[("w-", r, j)]
            x[a], x[b] = x[b], x[a]
    x[idx[("w0", r)]] *= -1
    for i in range(layout.n):
        c = idx[("t", i, r)]
        x[c] = 1 - x[c]
    return x


class _Relaxation:
    """Node relaxations: warm-started dual simplex (linear) or interior point (quadratic)."""

    def __init__(self, model: MipModel):
        self.model = model
        self.linear = model.is_linear
        if self.linear:
            self.engine = BoundedSimplex(model.c, model.A.toarray(), model.rhs, model.senses,
                                         model.lb, model.ub)
            self.started = False
        else:
            self.A = model.A.toarray()

    def solve(self, lb, ub):
        """Return (status, x, value); status is optimal, infeasible or unknown."""
        if np.any(lb > ub + 1e-9):
            return INFEASIBLE, None, math.inf
        if self.linear:
            if not self.started:
                self.engine.lb[: len(lb)], self.engine.ub[: len(ub)] = lb, ub
                res = self.engine.solve_fresh() if self.engine.basis is not None else self.engine.solve()
                self.started = res.status in ("optimal", "infeasible")
            else:
                self.engine.set_bounds(lb, ub)
                res = self.engine.resolve()
                if res.status not in ("optimal", "infeasible"):
                    res = self.engine.solve_fresh()
            if res.status == "optimal":
                return OPTIMAL, res.x, res.objective
            if res.status == "infeasible":
                return INFEASIBLE, None, math.inf
            self.started = False
            return "unknown", None, -math.inf
        return self._solve_quadratic(lb, ub)

    def _solve_quadratic(self, lb, ub):
        model = self.model
        fixed = lb == ub
        free = np.flatnonzero(~fixed)
        xf = np.where(fixed, lb, 0.0)
        A = self.A
        shift = A @ xf
        Af = A[:, free]
        senses = np.array(model.senses)
        Lr, Gr, Er = senses == "L", senses == "G", senses == "E"
        G = np.vstack([Af[Lr], -Af[Gr]])
        h = np.concatenate([(model.rhs - shift)[Lr], -(model.rhs - shift)[Gr]])
        # bounds of free columns as rows
        lbf, ubf = lb[free], ub[free]
        rows, rhs = [G], [h]
        fin = np.isfinite(lbf)
        if fin.any():
            B = np.zeros((fin.sum(), free.size))
            B[np.arange(fin.sum()), np.flatnonzero(fin)] = -1.0
            rows.append(B)
            rhs.append(-lbf[fin])
        fin = np.isfinite(ubf)
        if fin.any():
            B = np.zeros((fin.sum(), free.size))
            B[np.arange(fin.sum()), np.flatnonzero(fin)] = 1.0
            rows.append(B)
            rhs.append(ubf[fin])
        G, h = np.vstack(rows), np.concatenate(rhs)
        keep = np.any(G != 0, axis=1)
        if np.any(h[~keep] < -1e-9):
            return INFEASIBLE, None, math.inf
        G, h = G[keep], h[keep]
        Ae, be = Af[Er], (model.rhs - shift)[Er]
        keep = np.any(Ae != 0, axis=1)
        if np.any(np.abs(be[~keep]) > 1e-9):
            return INFEASIBLE, None, math.inf
        Ae, be = Ae[keep], be[keep]
        pos = {c: q for q, c in enumerate(free)}
        quads = []
        for theta, cols in model.quads:
            P = np.zeros((free.size, free.size))
            q = np.zeros(free.size)
            r0 = 0.0
            for c in cols:
                if c in pos:
                    P[pos[c], pos[c]] = 1.0
                else:
                    r0 += 0.5 * xf[c] ** 2
            if theta in pos:
                q[pos[theta]] = -1.0
            else:
                r0 -= xf[theta]
            quads.append((P, q, r0))
        cf = model.c[free]
        res = solve_qcqp(cf, G, h, Ae, be, quads, tol=1e-9)
        if res.status == "infeasible":
            return INFEASIBLE, None, math.inf
        if not res.ok:
            return "unknown", None, -math.inf
        x = xf.copy()
        x[free] = res.x
        return OPTIMAL, x, float(model.c @ x)


def branch_and_bound(model: MipModel, options: Optional[SolveOptions] = None, warm_start=None) -> Solution:
    """Best-bound branch-and-bound with depth-first plunging until the first incumbent.

    ``warm_start`` may be a :class:`Solution` carrying a full vector ``x`` or
    a vector itself; it becomes the incumbent if it is feasible.
    """
    opts = options or SolveOptions()
    start = time.perf_counter()
    lay = model.layout
    lb0, ub0 = model.lb.copy(), model.ub.copy()
    if opts.symmetry:
        # t -> 1 - t together with (w, w0) -> -(w, w0) maps solutions to solutions
        for r in range(lay.m):
            c = lay.col(("t", 0, r))
            if lb0[c] < ub0[c]:
                lb0[c] = 1.0
    ints = np.flatnonzero(model.integer)
    pri = _priority(lay)[ints] if opts.branching == "priority" else np.zeros(ints.size, int)
    tol_int = opts.feas_tol

    inc_x, inc_val = None, math.inf
    if warm_start is not None:
        wx = warm_start.x if isinstance(warm_start, Solution) else np.asarray(warm_start, float)
        if wx is not None:
            wx = np.asarray(wx, float)
            if opts.symmetry:
                for r in range(lay.m):
                    c = lay.col(("t", 0, r))
                    if wx[c] < 0.5 and lb0[c] == 1.0 and model.lb[c] < 1.0:
                        wx = _flip_hyperplane(lay, wx, r)
            rep = validate_solution(model, wx, opts.feas_tol)
            inside = np.all(wx >= lb0 - opts.feas_tol) and np.all(wx <= ub0 + opts.feas_tol)
            if rep.feasible(opts.feas_tol) and inside:
                inc_x, inc_val = wx, model.objective_value(wx)

    relax = _Relaxation(model)

    def pruned(bound):
        if inc_x is None:
            return False
        return bound >= inc_val - max(opts.gap_abs, opts.gap_rel * abs(inc_val))

    def fractional(x):
        v = x[ints]
        frac = np.abs(v - np.round(v))
        cand = np.flatnonzero(frac > tol_int)
        if cand.size == 0:
            return None
        best_pri = pri[cand].min()
        cand = cand[pri[cand] == best_pri]
        score = np.minimum(v[cand] - np.floor(v[cand]), np.ceil(v[cand]) - v[cand])
        top = cand[score >= score.max() - 1e-12]
        return int(ints[top.min()])

    def first_free(lb, ub):
        free = np.flatnonzero(lb[ints] < ub[ints])
        if free.size == 0:
            return None
        best_pri = pri[free].min()
        return int(ints[free[pri[free] == best_pri].min()])

    def leaf(lb, ub, x):
        """Round binaries, fix them and re-solve to get an exactly feasible point."""
        lb2, ub2 = lb.copy(), ub.copy()
        lb2[ints] = ub2[ints] = np.round(x[ints])
        st, xx, val = relax.solve(lb2, ub2)
        return (xx, val) if st == OPTIMAL else (None, math.inf)

    nodes = 0
    seq = itertools.count()
    stack, heap = [], []
    status_root, x_root, val_root = relax.solve(lb0, ub0)
    root_bound = val_root
    limit_hit = False
    if status_root == INFEASIBLE:
        if inc_x is None:
            return Solution(None, None, None, None, None, math.inf, math.inf, INFEASIBLE, 1,
                            time.perf_counter() - start)
        stack = []
    else:
        stack.append((val_root, next(seq), lb0, ub0, x_root, 0))
    nodes = 1

    def push(item):
        if inc_x is None:
            stack.append(item)
        else:
            heapq.heappush(heap, item)

    dive = []
    while stack or heap or dive:
        if inc_x is not None and stack:
            for item in stack:
                heapq.heappush(heap, item)
            stack = []
        if dive:
            # plunge: continue with the preferred child of the node just branched
            item = dive.pop()
            for other in dive:
                heapq.heappush(heap, other)
            dive = []
        else:
            item = stack.pop() if stack else heapq.heappop(heap)
        bound, _, lb, ub, x, depth = item
        if pruned(bound):
            continue
        if nodes >= opts.node_limit or time.perf_counter() - start > opts.time_limit:
            push(item)
            for other in dive:
                heapq.heappush(heap, other)
            dive = []
            limit_hit = True
            break
        if x is not None:
            var = fractional(x)
            if var is None:
                xx, val = leaf(lb, ub, x)
                if xx is not None and val < inc_val:
                    inc_x, inc_val = xx, val
                continue
        else:
            var = first_free(lb, ub)
            if var is None:
                continue
        xv = 0.5 if x is None else x[var]
        children = []
        for val in ((1.0, 0.0) if xv >= 0.5 else (0.0, 1.0)):
            clb, cub = lb.copy(), ub.copy()
            clb[var] = cub[var] = val
            children.append((clb, cub))
        # depth-first order: the nearer rounding is explored first, so push it last
        for clb, cub in reversed(children):
            st, cx, cval = relax.solve(clb, cub)
            nodes += 1
            if st == INFEASIBLE:
                continue
            cb = max(cval, bound) if st == OPTIMAL else bound
            if pruned(cb):
                continue
            if st == OPTIMAL and fractional(cx) is None:
                xx, v = leaf(clb, cub, cx)
                if xx is not None and v < inc_val:
                    inc_x, inc_val = xx, v
                continue
            child = (cb, next(seq), clb, cub, cx if st == OPTIMAL else None, depth + 1)
            if inc_x is not None and opts.plunge:
                dive.append(child)
            else:
                push(child)
        if opts.log_every and nodes % opts.log_every < 2:
            open_b = min([it[0] for it in heap + stack], default=inc_val)
            log.info("node %d bound %.6f incumbent %.6f open %d", nodes, open_b, inc_val,
                     len(heap) + len(stack))

    wall = time.perf_counter() - start
    open_bounds = [it[0] for it in heap + stack + dive]
    if inc_x is None:
        if limit_hit:
            return Solution(None, None, None, None, None, math.inf, min(open_bounds, default=root_bound),
                            LIMIT, nodes, wall)
        return Solution(None, None, None, None, None, math.inf, math.inf, INFEASIBLE, nodes, wall)
    bound = min(open_bounds + [inc_val]) if limit_hit else inc_val
    status = LIMIT if limit_hit and inc_val - bound > max(opts.gap_abs, opts.gap_rel * abs(inc_val)) else OPTIMAL
    if limit_hit and status == OPTIMAL:
        bound = min(bound, inc_val)
    log.info("done nodes %d bound %.6f incumbent %.6f status %s", nodes, bound, inc_val, status)
    return solution_from_x(model, inc_x, inc_val, bound, status, nodes, wall)


# ---------------------------------------------------------------- oracles
def _canonical_patterns(n, m):
    """Sign indicator matrices modulo hyperplane flips and permutations."""
    rest = list(itertools.product((0, 1), repeat=n - 1))
    cols = [(1,) + c for c in rest]
    for combo in itertools.combinations_with_replacement(range(len(cols)), m):
        yield np.array([cols[q] for q in combo]).T


def brute_force(dataset: Dataset, params: Hyperparameters, T: Optional[float] = None,
                engine: str = "highs") -> Solution:
    """Global optimum by enumeration (n <= 8, m <= 2, k <= 3).

    Every sign-indicator matrix t is visited up to the symmetries of the
    arrangement (flipping a hyperplane, permuting hyperplanes).  For each t
    all cell-to-class maps are listed and, for wrong-classified observations,
    every admissible target cell.  Each wrong-classified observation costs at
    least C2 (it violates its target on some hyperplane by at least 1), which
    is used to skip maps that cannot beat the incumbent.
    """
    n, k, m = dataset.n, dataset.k, params.m
    if n > 8 or m > 2 or k > 3:
        raise GuardError("brute_force is limited to n <= 8, m <= 2, k <= 3")
    start = time.perf_counter()
    T = estimate_big_m(dataset, params) if T is None else float(T)
    y = dataset.labels
    best_val, best = math.inf, None
    evals = 0
    for t in _canonical_patterns(n, m):
        keys = [tuple(row) for row in t]
        cells = sorted(set(keys))
        cell_of = np.array([cells.index(q) for q in keys])
        maps = []
        for cmap in itertools.product(range(1, k + 1), repeat=len(cells)):
            cls = np.array(cmap)[cell_of]
            wrong = cls != y
            good = ~wrong
            if any(not np.any(good & (y == s)) for s in range(1, k + 1) if np.any(wrong & (y == s))):
                continue
            maps.append((int(wrong.sum()), cmap, cls))
        maps.sort(key=lambda it: it[0])
        for nwrong, cmap, cls in maps:
            if params.C2 * nwrong >= best_val - 1e-12:
                break
            wrong = np.flatnonzero(cls != y)
            options = []
            for i in wrong:
                good_cells = {}
                for j in np.flatnonzero((y == y[i]) & (cls == y)):
                    good_cells.setdefault(cell_of[j], int(j))
                options.append(sorted(good_cells.values()))
            for choice in itertools.product(*options):
                rep = np.arange(n)
                rep[wrong] = choice
                b = complete_assignment(dataset, t, cls, rep)
                phi = eval_phi(dataset, params, b, T, engine=engine, check=False)
                evals += 1
                if phi.value < best_val - 1e-12:
                    best_val, best = phi.value, (b, phi)
    if best is None:
        return Solution(None, None, None, None, None, math.inf, math.inf, INFEASIBLE,
                        wall_time=time.perf_counter() - start, T=T, info={"evaluations": evals})
    model = build_model(dataset, params, T)
    b, phi = best
    sol = solution_from_phi(b, phi, OPTIMAL, model, bound=phi.value, wall_time=time.perf_counter() - start,
                            info={"evaluations": evals})
    return sol


# ------------------------------------------------------------- local search
def _cells_consistent(t, cls):
    seen = {}
    for row, c in zip(map(tuple, t), cls):
        if seen.setdefault(row, c) != c:
            return False
    return True


def local_search(dataset: Dataset, params: Hyperparameters, initial: Binaries,
                 options: Optional[SolveOptions] = None, T: Optional[float] = None,
                 fixings=None, model: Optional[MipModel] = None) -> Solution:
    """First-improvement search over t-flips, representative changes and resyncs.

    Moves:
      * flip one t_ir (the observation moves to a neighbouring cell, whose
        class it adopts if the cell is already occupied);
      * give a wrong-classified observation another representative cell;
      * relabel every observation of one cell;
      * resync t with the signs of the current hyperplanes.
    ``fixings`` (a FixingPlan) are respected: moves breaking them are skipped.
    """
    opts = options or SolveOptions()
    start = time.perf_counter()
    T = estimate_big_m(dataset, params) if T is None else float(T)
    rng = np.random.default_rng(opts.seed)
    n, m, k = dataset.n, params.m, dataset.k
    y = dataset.labels
    check_binaries(dataset, initial, m)
    if fixings is not None and not _respects(initial, fixings):
        raise InfeasibleBinariesError("initial binaries break the fixings")
    cache = {}

    def evaluate(b):
        key = b.key()
        if key not in cache:
            cache[key] = eval_phi(dataset, params, b, T, check=False)
        return cache[key]

    cur = initial
    cur_phi = evaluate(cur)
    accepted = [cur_phi.value]

    def candidate(t, cls, rep):
        if not _cells_consistent(t, cls):
            return None
        try:
            b = complete_assignment(dataset, t, cls, rep)
        except InfeasibleBinariesError:
            return None
        return b

    def moves(b, phi):
        t, cls, rep = b.t, b.classes, b.representative
        yield "resync", lambda: _resync(dataset, phi, b)
        order = rng.permutation(n * m)
        for q in order:
            i, r = divmod(int(q), m)

            def flip(i=i, r=r):
                t2 = t.copy()
                t2[i, r] = 1 - t2[i, r]
                cls2 = cls.copy()
                row = tuple(t2[i])
                mates = [j for j in range(n) if j != i and tuple(t2[j]) == row]
                if mates:
                    cls2[i] = cls[mates[0]]
                return candidate(t2, cls2, rep)
            yield "flip", flip
        for i in np.flatnonzero(b.xi):
            cells = {}
            for j in np.flatnonzero((y == y[i]) & (b.xi == 0)):
                cells.setdefault(tuple(t[j]), int(j))
            for j in sorted(cells.values()):
                if j == rep[i] or tuple(t[j]) == tuple(t[rep[i]]):
                    continue

                def reassign(i=i, j=j):
                    rep2 = rep.copy()
                    rep2[i] = j
                    return candidate(t, cls, rep2)
                yield "rep", reassign
        for row in sorted(set(map(tuple, t))):
            members = [j for j in range(n) if tuple(t[j]) == row]
            for s in sorted(set(int(y[j]) for j in members)):
                if s == cls[members[0]]:
                    continue

                def relabel(members=members, s=s):
                    cls2 = cls.copy()
                    cls2[members] = s
                    return candidate(t, cls2, rep)
                yield "relabel", relabel

    passes = 0
    improved = True
    while improved and passes < opts.max_passes:
        improved = False
        passes += 1
        for name, make in moves(cur, cur_phi):
            if time.perf_counter() - start > opts.time_limit:
                break
            b = make()
            if b is None or b.key() == cur.key():
                continue
            if fixings is not None and not _respects(b, fixings):
                continue
            phi = evaluate(b)
            if phi.value < cur_phi.value - 1e-9:
                cur, cur_phi = b, phi
                accepted.append(phi.value)
                improved = True
                break
    sol = solution_from_phi(cur, cur_phi, FEASIBLE, model, wall_time=time.perf_counter() - start,
                            info={"accepted": accepted, "passes": passes, "evaluations": len(cache)})
    return sol


def _resync(dataset, phi: PhiResult, b: Binaries):
    vals = dataset.points @ phi.omega.T + phi.omega0
    t = (vals >= 0).astype(int)
    y = dataset.labels
    cls = np.empty(dataset.n, dtype=int)
    for row in set(map(tuple, t)):
        members = np.flatnonzero((t == row).all(axis=1))
        counts = np.bincount(y[members], minlength=dataset.k + 1)
        cls[members] = int(np.argmax(counts))
    try:
        return complete_assignment(dataset, t, cls, b.representative)
    except InfeasibleBinariesError:
        return None


def _respects(b: Binaries, plan) -> bool:
    for value, keys in ((0, plan.zeros), (1, plan.ones)):
        for key in keys:
            kind = key[0]
            arr = {"t": b.t, "z": b.z, "h": b.h}.get(kind)
            if kind == "xi":
                if b.xi[key[1]] != value:
                    return False
            elif arr is not None and arr[key[1:]] != value:
                return False
    return True
