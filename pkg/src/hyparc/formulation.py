"""Mixed-integer model of the hyperplane-arrangement classifier.

The model is built explicitly (sparse rows with senses, bounds, integrality
flags and, for the Euclidean margin, epigraph rows ``Theta >= 0.5||w_r||^2``)
so it can be solved by the bundled branch-and-bound, written to MPS/JSON, or
audited row by row.  Each row carries a family tag: ``q1`` (margin epigraph),
``t+``, ``t-``, ``q2``, ``q3``, ``xi``, ``q4`` .. ``q9``, ``q7a``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import Dataset, Hyperparameters

MODEL_SCHEMA = "hyparc-model/1"
DEFAULT_W_MAX = 10.0
DEFAULT_SAFETY = 2.0


class UnsupportedFormatError(ValueError):
    pass


class FixingConflictError(ValueError):
    pass


def estimate_big_m(dataset: Dataset, params: Optional[Hyperparameters] = None,
                   w_max: float = DEFAULT_W_MAX, safety: float = DEFAULT_SAFETY) -> float:
    """Data-driven big-M: ``safety * (1 + w_max * max_i ||x_i|| + w_max)``."""
    if dataset.n == 0:
        raise ValueError("empty dataset")
    radius = float(np.max(np.linalg.norm(dataset.points, axis=1)))
    return safety * (1.0 + w_max * radius + w_max)


@dataclass(frozen=True)
class VariableLayout:
    """Column indices of every model variable, keyed as tuples.

    Keys: ``('w', r, j)`` (l2) or ``('w+', r, j)``/``('w-', r, j)`` (l1),
    ``('w0', r)``, ``('theta',)``, ``('e', i, r)``, ``('d', i, r)``,
    ``('t', i, r)``, ``('z', i, s)``, ``('h', i, j)``, ``('xi', i)``,
    ``('v', i, j, r)``, ``('u', i, j, s)``.  Indices are 0-based; classes
    ``s`` are 0-based here too (class id minus one).
    """

    names: tuple
    index: dict
    n: int
    p: int
    k: int
    m: int
    norm: str
    loss: str
    h_pairs: tuple

    def col(self, key) -> int:
        return self.index[key]

    def __contains__(self, key):
        return key in self.index

    def block(self, kind: str) -> np.ndarray:
        return np.array(sorted(c for key, c in self.index.items() if key[0] == kind), dtype=int)

    def omega_value(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        w = np.zeros((self.m, self.p))
        for r in range(self.m):
            for j in range(self.p):
                if self.norm == "l2":
                    w[r, j] = x[self.index[("w", r, j)]]
                else:
                    w[r, j] = x[self.index[("w+", r, j)]] - x[self.index[("w-", r, j)]]
        return w

    def omega0_value(self, x) -> np.ndarray:
        return np.array([x[self.index[("w0", r)]] for r in range(self.m)])

    def matrix(self, x, kind, shape) -> np.ndarray:
        out = np.zeros(shape)
        for key, c in self.index.items():
            if key[0] == kind:
                out[key[1:]] = x[c]
        return out

    def binary_keys(self):
        return [key for key in self.index if key[0] in ("t", "z", "h", "xi")]

    def count(self, kind: str) -> int:
        return sum(1 for key in self.index if key[0] == kind)


@dataclass(frozen=True)
class FixingPlan:
    """Variables fixed to 0 or 1, keyed as in :class:`VariableLayout`."""

    zeros: frozenset = frozenset()
    ones: frozenset = frozenset()
    provenance: str = "manual"
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "zeros", frozenset(tuple(k) for k in self.zeros))
        object.__setattr__(self, "ones", frozenset(tuple(k) for k in self.ones))
        both = self.zeros & self.ones
        if both:
            raise FixingConflictError(f"variables fixed to both 0 and 1: {sorted(both)[:5]}")
        if self.provenance not in ("alg1", "alg2", "manual", "merged"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.zeros) + len(self.ones)

    def merge(self, other: "FixingPlan") -> "FixingPlan":
        return FixingPlan(self.zeros | other.zeros, self.ones | other.ones, "merged",
                          self.seed if self.seed is not None else other.seed)

    def to_dict(self) -> dict:
        return {"provenance": self.provenance, "seed": self.seed,
                "zeros": sorted(list(k) for k in self.zeros),
                "ones": sorted(list(k) for k in self.ones)}

    @classmethod
    def from_dict(cls, data) -> "FixingPlan":
        return cls(frozenset(_key(k) for k in data["zeros"]), frozenset(_key(k) for k in data["ones"]),
                   data["provenance"], data.get("seed"))


def _key(seq):
    return (seq[0],) + tuple(int(v) for v in seq[1:])


@dataclass(frozen=True, eq=False)
class MipModel:
    layout: VariableLayout
    A: sp.csr_matrix
    senses: tuple
    rhs: np.ndarray
    row_tags: tuple
    row_names: tuple
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    quads: tuple
    meta: dict
    fixings: tuple = field(default=())

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def is_linear(self) -> bool:
        return not self.quads

    @property
    def T(self) -> float:
        return float(self.meta["T"])

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x, float))

    def rows_with_tag(self, tag) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.row_tags) if t == tag], dtype=int)


class _Rows:
    def __init__(self):
        self.data, self.ri, self.ci = [], [], []
        self.senses, self.rhs, self.tags, self.names = [], [], [], []

    def add(self, coefs, sense, rhs, tag, name):
        r = len(self.rhs)
        merged = {}
        for c, v in coefs:
            merged[c] = merged.get(c, 0.0) + v
        for c, v in merged.items():
            if v != 0.0:
                self.ri.append(r)
                self.ci.append(c)
                self.data.append(float(v))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.tags.append(tag)
        self.names.append(name)


def _validate_inputs(dataset: Dataset, params: Hyperparameters):
    if dataset.k < 2:
        raise ValueError("need at least two classes")
    if params.m < 1:
        raise ValueError("need at least one hyperplane")


def build_hinge(dataset: Dataset, params: Hyperparameters, T: Optional[float] = None,
                h_scope: str = "class") -> MipModel:
    """Hinge-loss model: margin + C1 * sum(e) + C2 * sum(d)."""
    if params.loss != "hinge":
        raise ValueError("build_hinge needs loss='hinge'")
    return _build(dataset, params, T, h_scope)


def build_ramp(dataset: Dataset, params: Hyperparameters, T: Optional[float] = None,
               h_scope: str = "class") -> MipModel:
    """Ramp-loss model: margin + C1 * sum(e) + C2 * sum(xi); no out-margin rows."""
    if params.loss != "ramp":
        raise ValueError("build_ramp needs loss='ramp'")
    return _build(dataset, params, T, h_scope)


def build_model(dataset: Dataset, params: Hyperparameters, T: Optional[float] = None,
                h_scope: str = "class") -> MipModel:
    """Build the model for ``params.loss``.

    ``h_scope="all"`` also creates the cross-class ``h_ij`` columns of the
    full n x n grid.  They enter no row, so the optimum is unchanged; the
    option exists to count variables the way the grid is usually counted.
    """
    if params.loss == "hinge":
        return build_hinge(dataset, params, T, h_scope)
    return build_ramp(dataset, params, T, h_scope)


def _build(dataset: Dataset, params: Hyperparameters, T, h_scope: str = "class") -> MipModel:
    if h_scope not in ("class", "all"):
        raise ValueError("h_scope must be 'class' or 'all'")
    _validate_inputs(dataset, params)
    X, y = dataset.points, dataset.labels - 1
    n, p, k, m = dataset.n, dataset.p, dataset.k, params.m
    hinge = params.loss == "hinge"
    T = estimate_big_m(dataset, params) if T is None else float(T)
    if T <= 0:
        raise ValueError("big-M must be positive")

    names, index, lb, ub, integer, cost = [], {}, [], [], [], []

    def var(key, lo, hi, is_int=False, obj=0.0):
        index[key] = len(names)
        names.append(_name(key))
        lb.append(lo)
        ub.append(hi)
        integer.append(is_int)
        cost.append(obj)
        return index[key]

    inf = math.inf
    for r in range(m):
        for j in range(p):
            if params.norm == "l2":
                var(("w", r, j), -inf, inf)
            else:
                var(("w+", r, j), 0.0, inf)
                var(("w-", r, j), 0.0, inf)
    for r in range(m):
        var(("w0", r), -inf, inf)
    var(("theta",), 0.0, inf, obj=1.0)
    for i in range(n):
        for r in range(m):
            var(("e", i, r), 0.0, inf, obj=params.C1)
    if hinge:
        for i in range(n):
            for r in range(m):
                var(("d", i, r), 0.0, inf, obj=params.C2)
    for i in range(n):
        for r in range(m):
            var(("t", i, r), 0.0, 1.0, True)
    for i in range(n):
        for s in range(k):
            var(("z", i, s), 0.0, 1.0, True)
    h_pairs = tuple((i, j) for i in range(n) for j in range(n) if y[i] == y[j])
    for i, j in h_pairs:
        var(("h", i, j), 0.0, 1.0, True)
    if h_scope == "all":
        for i in range(n):
            for j in range(n):
                if y[i] != y[j]:
                    var(("h", i, j), 0.0, 1.0, True)
    for i in range(n):
        var(("xi", i), 0.0, 1.0, True, obj=0.0 if hinge else params.C2)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        for r in range(m):
            var(("v", i, j, r), 0.0, 1.0)
        for s in range(k):
            var(("u", i, j, s), 0.0, 1.0)

    rows = _Rows()
    col = index
    theta = col[("theta",)]
    quads = []
    for r in range(m):
        if params.norm == "l2":
            quads.append((theta, tuple(col[("w", r, j)] for j in range(p))))
        else:
            for j in range(p):
                rows.add([(theta, 1.0), (col[("w+", r, j)], -1.0), (col[("w-", r, j)], -1.0)],
                         "G", 0.0, "q1", f"q1[{r},{j}]")

    def affine(i, r, sign=1.0):
        # sign * (w_r^t x_i + w_r0)
        out = [(col[("w0", r)], sign)]
        for j in range(p):
            if params.norm == "l2":
                out.append((col[("w", r, j)], sign * X[i, j]))
            else:
                out.append((col[("w+", r, j)], sign * X[i, j]))
                out.append((col[("w-", r, j)], -sign * X[i, j]))
        return out

    for i in range(n):
        for r in range(m):
            t = col[("t", i, r)]
            # f >= -T (1 - t)  and  f <= T t
            rows.add(affine(i, r) + [(t, -T)], "G", -T, "t+", f"t+[{i},{r}]")
            rows.add(affine(i, r) + [(t, -T)], "L", 0.0, "t-", f"t-[{i},{r}]")
    for i in range(n):
        rows.add([(col[("z", i, s)], 1.0) for s in range(k)], "E", 1.0, "q2", f"q2[{i}]")
    for i, j in pairs:
        for r in range(m):
            v, a, b = col[("v", i, j, r)], col[("t", i, r)], col[("t", j, r)]
            rows.add([(v, 1.0), (a, -1.0), (b, 1.0)], "G", 0.0, "q3", f"q3x1[{i},{j},{r}]")
            rows.add([(v, 1.0), (a, 1.0), (b, -1.0)], "G", 0.0, "q3", f"q3x2[{i},{j},{r}]")
            rows.add([(v, 1.0), (a, -1.0), (b, -1.0)], "L", 0.0, "q3", f"q3x3[{i},{j},{r}]")
            rows.add([(v, 1.0), (a, 1.0), (b, 1.0)], "L", 2.0, "q3", f"q3x4[{i},{j},{r}]")
        for s in range(k):
            u, a, b = col[("u", i, j, s)], col[("z", i, s)], col[("z", j, s)]
            rows.add([(u, 1.0), (a, -1.0), (b, 1.0)], "G", 0.0, "q3", f"q3a1[{i},{j},{s}]")
            rows.add([(u, 1.0), (a, 1.0), (b, -1.0)], "G", 0.0, "q3", f"q3a2[{i},{j},{s}]")
        rows.add([(col[("u", i, j, s)], 1.0) for s in range(k)]
                 + [(col[("v", i, j, r)], -2.0) for r in range(m)], "L", 0.0, "q3", f"q3[{i},{j}]")
    for i in range(n):
        rows.add([(col[("xi", i)], 1.0), (col[("z", i, y[i])], 1.0)], "E", 1.0, "xi", f"xi[{i}]")
    for i in range(n):
        rows.add([(col[("h", i, j)], 1.0) for j in range(n) if y[j] == y[i]], "E", 1.0, "q6", f"q6[{i}]")
    for i, j in h_pairs:
        if i != j:
            rows.add([(col[("xi", j)], 1.0), (col[("h", i, j)], 1.0)], "L", 1.0, "q7", f"q7[{i},{j}]")
    for i in range(n):
        rows.add([(col[("h", i, i)], 1.0), (col[("xi", i)], 1.0)], "E", 1.0, "q7a", f"q7a[{i}]")
    for i, j in h_pairs:
        hij = col[("h", i, j)]
        for r in range(m):
            ti, tj, e = col[("t", i, r)], col[("t", j, r)], col[("e", i, r)]
            # f + e >= 1 - T (3 - ti - tj - h)
            rows.add(affine(i, r) + [(e, 1.0), (ti, -T), (tj, -T), (hij, -T)], "G", 1.0 - 3.0 * T,
                     "q4", f"q4[{i},{j},{r}]")
            # f - e <= -1 + T (1 + ti + tj - h)
            rows.add(affine(i, r) + [(e, -1.0), (ti, -T), (tj, -T), (hij, T)], "L", T - 1.0,
                     "q5", f"q5[{i},{j},{r}]")
    if hinge:
        for i, j in h_pairs:
            if i == j:
                # with h_ii = 1 the pair rows reduce to d >= 1 -+ f - T, never binding
                continue
            hij = col[("h", i, j)]
            for r in range(m):
                ti, tj, d = col[("t", i, r)], col[("t", j, r)], col[("d", i, r)]
                # d >= 1 - f - T (2 + ti - tj - h)
                rows.add(affine(i, r) + [(d, 1.0), (ti, T), (tj, -T), (hij, -T)], "G", 1.0 - 2.0 * T,
                         "q8", f"q8[{i},{j},{r}]")
                # d >= 1 + f - T (2 - ti + tj - h)
                rows.add(affine(i, r, -1.0) + [(d, 1.0), (ti, -T), (tj, T), (hij, -T)], "G",
                         1.0 - 2.0 * T, "q9", f"q9[{i},{j},{r}]")

    A = sp.csr_matrix((rows.data, (rows.ri, rows.ci)), shape=(len(rows.rhs), len(names)))
    layout = VariableLayout(tuple(names), index, n, p, k, m, params.norm, params.loss, h_pairs)
    meta = {"n": n, "p": p, "k": k, "m": m, "T": T, "norm": params.norm, "loss": params.loss,
            "C1": params.C1, "C2": params.C2}
    return MipModel(layout, A, tuple(rows.senses), np.array(rows.rhs), tuple(rows.tags),
                    tuple(rows.names), np.array(cost), np.array(lb, float), np.array(ub, float),
                    np.array(integer, bool), tuple(quads), meta)


def _name(key) -> str:
    head, rest = key[0], key[1:]
    return head if not rest else f"{head}[{','.join(str(v) for v in rest)}]"


def h_variable_count(model: MipModel) -> int:
    """Number of h columns still free (upper bound above lower bound)."""
    cols = model.layout.block("h")
    return int(np.sum(model.ub[cols] > model.lb[cols]))


def apply_fixings(model: MipModel, plan: FixingPlan) -> MipModel:
    """Tighten bounds to the plan's values; rows are left untouched."""
    lb, ub = model.lb.copy(), model.ub.copy()
    for value, keys in ((0.0, plan.zeros), (1.0, plan.ones)):
        for key in keys:
            if key not in model.layout:
                raise KeyError(f"variable {key} not in model")
            c = model.layout.col(key)
            if value < lb[c] - 1e-12 or value > ub[c] + 1e-12:
                raise FixingConflictError(f"{key} cannot be fixed to {value:g}")
            lb[c] = ub[c] = value
    if not len(plan):
        return model
    return replace(model, lb=lb, ub=ub, fixings=model.fixings + (plan,))


# ---------------------------------------------------------------- validation
@dataclass
class ResidualReport:
    max_violation: dict
    bound_violation: float
    integrality_violation: float
    big_m_flag: bool
    max_abs_affine: float
    T: float

    def feasible(self, tol=1e-6) -> bool:
        return (max(self.max_violation.values(), default=0.0) <= tol
                and self.bound_violation <= tol and self.integrality_violation <= tol)


def row_violations(model: MipModel, x) -> np.ndarray:
    ax = model.A @ np.asarray(x, float)
    viol = np.zeros(model.n_rows)
    for sense, mask in (("L", None), ("G", None), ("E", None)):
        sel = np.array([s == sense for s in model.senses], dtype=bool)
        if sense == "L":
            viol[sel] = np.maximum(ax[sel] - model.rhs[sel], 0.0)
        elif sense == "G":
            viol[sel] = np.maximum(model.rhs[sel] - ax[sel], 0.0)
        else:
            viol[sel] = np.abs(ax[sel] - model.rhs[sel])
    return viol


def validate_solution(model: MipModel, x, tol: float = 1e-6) -> ResidualReport:
    """Per-family maximum violation plus the big-M validity flag.

    The flag is raised when some affine value comes within ``1 + tol`` of
    ``T`` in magnitude: beyond that point the switched-off margin rows start
    to bind and the model no longer represents the intended losses.
    """
    x = np.asarray(x, float)
    viol = row_violations(model, x)
    fam = {}
    for tag, v in zip(model.row_tags, viol):
        fam[tag] = max(fam.get(tag, 0.0), float(v))
    for theta, cols in model.quads:
        v = max(0.0, 0.5 * float(np.sum(x[list(cols)] ** 2)) - x[theta])
        fam["q1"] = max(fam.get("q1", 0.0), v)
    bnd = float(np.max(np.maximum(model.lb - x, 0.0) + np.maximum(x - model.ub, 0.0), initial=0.0))
    ints = x[model.integer]
    intv = float(np.max(np.abs(ints - np.round(ints)), initial=0.0))
    lay = model.layout
    X = model.meta.get("points")
    vals = affine_values(model, x) if X is None else X
    big = float(np.max(np.abs(vals), initial=0.0))
    flag = big >= model.T - 1.0 - tol
    return ResidualReport(fam, bnd, intv, bool(flag), big, model.T)


def affine_values(model: MipModel, x) -> np.ndarray:
    """Recover ``w_r^t x_i + w_r0`` from the (t-) rows of the model."""
    x = np.asarray(x, float)
    lay = model.layout
    out = np.zeros((lay.n, lay.m))
    tminus = {name: idx for idx, name in enumerate(model.row_names) if name.startswith("t-[")}
    for i in range(lay.n):
        for r in range(lay.m):
            row = tminus[f"t-[{i},{r}]"]
            start, end = model.A.indptr[row], model.A.indptr[row + 1]
            cols, vals = model.A.indices[start:end], model.A.data[start:end]
            tcol = lay.col(("t", i, r))
            keep = cols != tcol
            out[i, r] = float(vals[keep] @ x[cols[keep]])
    return out


# -------------------------------------------------------------------- export
def export_mps(model: MipModel, name: str = "HYPARC") -> str:
    """Fixed-format MPS for linear (l1) models."""
    if not model.is_linear:
        raise UnsupportedFormatError("l2 models carry quadratic epigraph rows; use export_json")
    cname = [f"C{j:07d}" for j in range(model.n_cols)]
    rname = [f"R{i:07d}" for i in range(model.n_rows)]
    out = [f"NAME          {name}"]
    out.append("* columns: " + " ".join(f"{cname[j]}={v}" for j, v in enumerate(model.layout.names)))
    out.append("ROWS")
    out.append(" N  OBJ")
    for i, s in enumerate(model.senses):
        out.append(f" {s}  {rname[i]}")
    out.append("COLUMNS")
    csc = model.A.tocsc()
    in_int = False
    for j in range(model.n_cols):
        if model.integer[j] and not in_int:
            out.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not model.integer[j] and in_int:
            out.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = []
        if model.c[j] != 0:
            entries.append(("OBJ", model.c[j]))
        for p in range(csc.indptr[j], csc.indptr[j + 1]):
            entries.append((rname[csc.indices[p]], csc.data[p]))
        if not entries:
            entries.append(("OBJ", 0.0))
        for rn, v in entries:
            out.append(f"    {cname[j]:<8}  {rn:<8}  {_num(v):>12}")
    if in_int:
        out.append("    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    for i, v in enumerate(model.rhs):
        if v != 0:
            out.append(f"    RHS       {rname[i]:<8}  {_num(v):>12}")
    out.append("BOUNDS")
    for j in range(model.n_cols):
        lo, hi = model.lb[j], model.ub[j]
        cn = cname[j]
        if lo == hi:
            out.append(f" FX BND       {cn:<8}  {_num(lo):>12}")
        elif lo == -math.inf and hi == math.inf:
            out.append(f" FR BND       {cn:<8}")
        else:
            if lo == -math.inf:
                out.append(f" MI BND       {cn:<8}")
            elif lo != 0:
                out.append(f" LO BND       {cn:<8}  {_num(lo):>12}")
            if hi != math.inf:
                out.append(f" UP BND       {cn:<8}  {_num(hi):>12}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _num(v) -> str:
    # fixed-format fields hold 12 characters; keep as many digits as fit
    s = repr(float(v))
    digits = 12
    while len(s) > 12 and digits > 1:
        s = f"{float(v):.{digits}g}"
        digits -= 1
    return s


def parse_mps(text: str) -> dict:
    """Minimal fixed-format MPS reader (enough to round-trip :func:`export_mps`)."""
    section, rows, cols, rhs, bounds = None, {}, {}, {}, {}
    order_rows, order_cols, integer = [], [], set()
    in_int = False
    for line in text.splitlines():
        if not line.strip() or line.startswith("*"):
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        parts = line.split()
        if section == "ROWS":
            rows[parts[1]] = parts[0]
            if parts[0] != "N":
                order_rows.append(parts[1])
        elif section == "COLUMNS":
            if parts[1] == "'MARKER'":
                in_int = parts[2] == "'INTORG'"
                continue
            c = parts[0]
            if c not in cols:
                cols[c] = {}
                order_cols.append(c)
                if in_int:
                    integer.add(c)
            for rn, v in zip(parts[1::2], parts[2::2]):
                cols[c][rn] = float(v)
        elif section == "RHS":
            for rn, v in zip(parts[1::2], parts[2::2]):
                rhs[rn] = float(v)
        elif section == "BOUNDS":
            kind, c = parts[0], parts[2]
            lo, hi = bounds.get(c, (0.0, math.inf))
            v = float(parts[3]) if len(parts) > 3 else None
            if kind == "FX":
                lo = hi = v
            elif kind == "FR":
                lo, hi = -math.inf, math.inf
            elif kind == "MI":
                lo = -math.inf
            elif kind == "LO":
                lo = v
            elif kind == "UP":
                hi = v
            bounds[c] = (lo, hi)
    return {"rows": rows, "row_order": order_rows, "columns": cols, "column_order": order_cols,
            "rhs": rhs, "bounds": bounds, "integer": integer}


def export_json(model: MipModel) -> str:
    """Versioned JSON with every row tagged by its constraint family."""
    csr = model.A
    rows = []
    for i in range(model.n_rows):
        s, e = csr.indptr[i], csr.indptr[i + 1]
        rows.append({"name": model.row_names[i], "tag": model.row_tags[i], "sense": model.senses[i],
                     "rhs": float(model.rhs[i]),
                     "coefs": [[int(c), float(v)] for c, v in zip(csr.indices[s:e], csr.data[s:e])]})
    variables = [{"name": nm, "key": list(key), "lb": _jnum(model.lb[c]), "ub": _jnum(model.ub[c]),
                  "integer": bool(model.integer[c]), "obj": float(model.c[c])}
                 for key, c in sorted(model.layout.index.items(), key=lambda kv: kv[1])
                 for nm in [model.layout.names[c]]]
    quads = [{"tag": "q1", "theta": int(t), "omega": [int(c) for c in cols],
              "form": "theta >= 0.5 * sum(omega^2)"} for t, cols in model.quads]
    lay = model.layout
    doc = {"schema": MODEL_SCHEMA,
           "meta": {k: v for k, v in model.meta.items() if k != "points"},
           "layout": {"n": lay.n, "p": lay.p, "k": lay.k, "m": lay.m, "norm": lay.norm, "loss": lay.loss,
                      "h_pairs": [list(pq) for pq in lay.h_pairs]},
           "variables": variables, "rows": rows, "quadratic": quads,
           "fixings": [plan.to_dict() for plan in model.fixings]}
    return json.dumps(doc, indent=1, sort_keys=True)


def _jnum(v):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return float(v)


def _unj(v):
    return {"inf": math.inf, "-inf": -math.inf}.get(v, v) if isinstance(v, str) else float(v)


def load_json(text: str) -> MipModel:
    doc = json.loads(text)
    if doc.get("schema") != MODEL_SCHEMA:
        raise UnsupportedFormatError(f"expected schema {MODEL_SCHEMA}")
    variables = doc["variables"]
    index = {_key(v["key"]): c for c, v in enumerate(variables)}
    L = doc["layout"]
    layout = VariableLayout(tuple(v["name"] for v in variables), index, L["n"], L["p"], L["k"], L["m"],
                            L["norm"], L["loss"], tuple(tuple(pq) for pq in L["h_pairs"]))
    data, ri, ci = [], [], []
    for r, row in enumerate(doc["rows"]):
        for c, v in row["coefs"]:
            ri.append(r)
            ci.append(c)
            data.append(v)
    A = sp.csr_matrix((data, (ri, ci)), shape=(len(doc["rows"]), len(variables)))
    quads = tuple((q["theta"], tuple(q["omega"])) for q in doc["quadratic"])
    return MipModel(layout, A, tuple(r["sense"] for r in doc["rows"]),
                    np.array([r["rhs"] for r in doc["rows"]], float),
                    tuple(r["tag"] for r in doc["rows"]), tuple(r["name"] for r in doc["rows"]),
                    np.array([v["obj"] for v in variables], float),
                    np.array([_unj(v["lb"]) for v in variables], float),
                    np.array([_unj(v["ub"]) for v in variables], float),
                    np.array([v["integer"] for v in variables], bool), quads, dict(doc["meta"]),
                    tuple(FixingPlan.from_dict(p) for p in doc["fixings"]))


def models_equal(a: MipModel, b: MipModel) -> bool:
    return (a.layout.names == b.layout.names and a.layout.index == b.layout.index
            and (a.A != b.A).nnz == 0 and a.A.shape == b.A.shape and a.senses == b.senses
            and np.array_equal(a.rhs, b.rhs) and a.row_tags == b.row_tags and a.row_names == b.row_names
            and np.array_equal(a.c, b.c) and np.array_equal(a.lb, b.lb) and np.array_equal(a.ub, b.ub)
            and np.array_equal(a.integer, b.integer) and a.quads == b.quads and a.meta == b.meta
            and a.fixings == b.fixings)
