"""Decision rule, prediction and training entry points.

A trained model maps the sign pattern of every well-classified training
observation to its class.  Points falling in a cell without an entry go to
the closest well-classified representative, where the distance to
representative j is the sum of |w_r x + w_r0| over the hyperplanes on which
x and x_j disagree.
"""

from __future__ import annotations

import json
import logging
from typing import Optional

import numpy as np

from .core import (Arrangement, Dataset, DegenerateModelError, Hyperparameters, TrainedModel,
                   check_points, sign_patterns)
from .formulation import build_model, estimate_big_m
from .lp import BoundedSimplex
from .reduction import initial_solution, math_heuristic
from .solver import LIMIT, OPTIMAL, Binaries, Solution, SolveOptions, assemble, branch_and_bound, eval_phi

log = logging.getLogger(__name__)

TRAINED_SCHEMA = "hyparc-trained/1"
ON_PLANE_TOL = 1e-7


class SolverLimitError(RuntimeError):
    """The solver stopped on a limit before finding any feasible solution."""


# ----------------------------------------------------------------- the rule
def build_rule(solution: Solution, dataset: Dataset, params: Optional[Hyperparameters] = None) -> TrainedModel:
    """Tabulate the sign pattern of every well-classified observation.

    Patterns are the signs of the affine values, except that an observation
    within ``ON_PLANE_TOL`` of a hyperplane keeps the solver's t value.

    Raises :class:`DegenerateModelError` when no observation is well
    classified or two of them share a pattern with different classes.
    """
    if not solution.has_incumbent:
        raise DegenerateModelError("solution has no incumbent")
    params = params or Hyperparameters(m=solution.omega.shape[0])
    arr = Arrangement.from_arrays(solution.omega, solution.omega0, params.norm)
    xi = np.asarray(solution.binaries.xi)
    J = np.flatnonzero(xi == 0)
    if J.size == 0:
        raise DegenerateModelError("no well-classified observation (empty J)")
    # an observation lying on a hyperplane takes the side chosen by the solver
    vals = arr.values(dataset.points[J])
    t = 2 * np.asarray(solution.binaries.t)[J] - 1
    S = np.where(np.abs(vals) <= ON_PLANE_TOL, t, np.where(vals >= 0, 1, -1))
    reps, table = [], {}
    for row, j in zip(S, J):
        pattern = tuple(int(v) for v in row)
        cls = int(dataset.labels[j])
        if table.setdefault(pattern, cls) != cls:
            raise DegenerateModelError(
                f"pattern {_pattern_str(pattern)} holds classes {table[pattern]} and {cls}")
        reps.append((pattern, cls, tuple(float(v) for v in dataset.points[j])))
    extra = {"T": solution.T, "nodes": int(solution.nodes), "bound": _finite(solution.bound),
             "big_m_flag": bool(solution.big_m_flag)}
    return TrainedModel(arr, table, tuple(reps), params, float(solution.objective), dataset.means,
                        dataset.scales, dataset.label_names, solution.binaries.to_dict(),
                        solution.status, extra)


def _finite(v):
    return float(v) if v is not None and np.isfinite(v) else None


def _pattern_str(pattern) -> str:
    return "".join("+" if s > 0 else "-" for s in pattern)


def _parse_pattern(text: str) -> tuple:
    if any(ch not in "+-" for ch in text):
        raise ValueError(f"bad pattern {text!r}")
    return tuple(1 if ch == "+" else -1 for ch in text)


def _rep_arrays(model: TrainedModel):
    """Representative patterns and classes, one row per representative in order."""
    P = np.array([r[0] for r in model.representatives], dtype=int).reshape(-1, model.arrangement.m)
    C = np.array([r[1] for r in model.representatives], dtype=int)
    return P, C


def _prepare(model: TrainedModel, points, normalized: bool) -> np.ndarray:
    X = check_points(points, model.arrangement.p)
    if not normalized and model.means is not None:
        X = (X - model.means) / model.scales
    return X


def empty_cell_costs(model: TrainedModel, X) -> np.ndarray:
    """Cost matrix (points x representatives) of the empty-cell assignment."""
    vals = model.arrangement.values(X)
    S = np.where(vals >= 0, 1, -1)
    P, _ = _rep_arrays(model)
    disagree = S[:, None, :] != P[None, :, :]
    return np.sum(np.abs(vals)[:, None, :] * disagree, axis=2)


def predict_batch(model: TrainedModel, points, normalized: bool = False) -> np.ndarray:
    """Class ids (1-based) for a batch of points.

    Raw features are normalized with the model's stored statistics unless
    ``normalized`` is set.
    """
    X = _prepare(model, points, normalized)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=int)
    S = sign_patterns(model.arrangement, X)
    out = np.zeros(X.shape[0], dtype=int)
    miss = []
    for q, row in enumerate(S):
        cls = model.cell_table.get(tuple(int(v) for v in row))
        if cls is None:
            miss.append(q)
        else:
            out[q] = cls
    if miss:
        _, C = _rep_arrays(model)
        cost = empty_cell_costs(model, X[miss])
        for q, row in zip(miss, cost):
            best = row.min()
            tied = np.flatnonzero(row <= best + 1e-12 * max(1.0, abs(best)))
            # lowest class first, then lowest representative index
            out[q] = int(C[tied].min())
    return out


def predict(model: TrainedModel, x, normalized: bool = False) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict takes a single point; use predict_batch")
    return int(predict_batch(model, x[None, :], normalized)[0])


def predict_lp(model: TrainedModel, x, normalized: bool = False) -> int:
    """Empty-cell rule solved as the assignment LP with the bundled simplex.

    ``min sum_j gamma_j c_j  s.t.  sum_j gamma_j = 1, gamma >= 0`` over the
    representatives; its constraint matrix is totally unimodular, so the
    optimum is a vertex picking a single representative.
    """
    X = _prepare(model, np.atleast_2d(x), normalized)
    pattern = tuple(int(v) for v in sign_patterns(model.arrangement, X)[0])
    if pattern in model.cell_table:
        return model.cell_table[pattern]
    cost = empty_cell_costs(model, X)[0]
    q = cost.size
    res = BoundedSimplex(cost, np.ones((1, q)), np.array([1.0]), "E", np.zeros(q), np.full(q, np.inf)).solve()
    if not res.ok:
        raise RuntimeError(f"assignment LP failed: {res.status}")
    _, C = _rep_arrays(model)
    return int(C[int(np.argmax(res.x))])


def accuracy(preds, labels) -> float:
    """Percentage of predictions equal to the labels."""
    preds, labels = np.asarray(preds).ravel(), np.asarray(labels).ravel()
    if preds.size != labels.size:
        raise ValueError(f"{preds.size} predictions for {labels.size} labels")
    if preds.size == 0:
        raise ValueError("no predictions")
    return float(np.mean(preds == labels) * 100.0)


# ---------------------------------------------------------------- training
def _solve_once(dataset, params, heuristic, tau, theta, options, seed, T):
    if heuristic:
        return math_heuristic(dataset, params, tau, theta, options, seed=seed, T=T)
    model = build_model(dataset, params, T)
    b, _ = initial_solution(dataset, params, model.T)
    warm = assemble(model, b, eval_phi(dataset, params, b, model.T))
    return branch_and_bound(model, options, warm)


def train(dataset: Dataset, params: Hyperparameters, heuristic: str = "auto", tau=None, theta=None,
          options: Optional[SolveOptions] = None, seed: int = 0, T: Optional[float] = None,
          max_retries: int = 3) -> TrainedModel:
    """Fit an arrangement and build its decision rule.

    ``heuristic`` is ``"on"`` (math-heuristic), ``"off"`` (exact
    branch-and-bound) or ``"auto"`` (exact up to 8 observations).  When the
    solution's affine values reach the big-M range, T is multiplied by 4 and
    the solve repeated, at most ``max_retries`` times.
    """
    if heuristic not in ("auto", "on", "off"):
        raise ValueError("heuristic must be 'auto', 'on' or 'off'")
    if 2 ** params.m < dataset.k:
        raise ValueError(f"{params.m} hyperplanes give at most {2 ** params.m} cells for {dataset.k} classes")
    use_heur = heuristic == "on" or (heuristic == "auto" and dataset.n > 8)
    options = options or SolveOptions(seed=seed)
    T = estimate_big_m(dataset, params) if T is None else float(T)
    for attempt in range(max_retries + 1):
        sol = _solve_once(dataset, params, use_heur, tau, theta, options, seed, T)
        if not sol.has_incumbent:
            if sol.status == LIMIT:
                raise SolverLimitError("solver limit reached without a feasible solution")
            raise DegenerateModelError(f"no feasible solution ({sol.status})")
        if not sol.big_m_flag or attempt == max_retries:
            break
        log.warning("affine values reach the big-M range; retrying with T=%g", 4 * T)
        T *= 4.0
    if sol.big_m_flag:
        log.warning("big-M still binding after %d retries", max_retries)
    model = build_rule(sol, dataset, params)
    model.extra.update({"heuristic": use_heur, "seed": seed, "gap": _finite(sol.gap)})
    return model


def default_trainer(options: Optional[SolveOptions] = None, seed: int = 0, heuristic: str = "auto"):
    """A ``(dataset, params) -> TrainedModel`` callable for cross-validation."""
    def fit(dataset, params):
        return train(dataset, params, heuristic=heuristic, options=options, seed=seed)
    return fit


# --------------------------------------------------------------------- JSON
def _arr(v):
    return None if v is None else [float(a) for a in np.asarray(v).ravel()]


def model_to_dict(model: TrainedModel) -> dict:
    arr = model.arrangement
    return {
        "schema": TRAINED_SCHEMA,
        "norm": arr.norm,
        "hyperplanes": [{"coefficients": [float(c) for c in h.coefficients], "intercept": float(h.intercept)}
                        for h in arr.hyperplanes],
        "cell_table": {_pattern_str(p): int(c) for p, c in sorted(model.cell_table.items())},
        "representatives": [{"pattern": _pattern_str(p), "class": int(c), "point": [float(v) for v in x]}
                            for p, c, x in model.representatives],
        "hyperparameters": model.hyperparams.as_dict(),
        "objective": float(model.objective),
        "means": _arr(model.means),
        "scales": _arr(model.scales),
        "label_names": None if model.label_names is None else [str(s) for s in model.label_names],
        "binaries": model.binaries,
        "status": model.status,
        "extra": {key: v for key, v in sorted(model.extra.items())},
    }


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n"


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("schema") != TRAINED_SCHEMA:
        raise ValueError(f"not a {TRAINED_SCHEMA} document")
    omega = np.array([h["coefficients"] for h in doc["hyperplanes"]], dtype=float)
    omega0 = np.array([h["intercept"] for h in doc["hyperplanes"]], dtype=float)
    arr = Arrangement.from_arrays(omega, omega0, doc["norm"])
    table = {_parse_pattern(p): int(c) for p, c in doc["cell_table"].items()}
    reps = tuple((_parse_pattern(r["pattern"]), int(r["class"]), tuple(r["point"])) for r in doc["representatives"])
    hp = Hyperparameters(**doc["hyperparameters"])
    means = None if doc.get("means") is None else np.array(doc["means"])
    scales = None if doc.get("scales") is None else np.array(doc["scales"])
    names = None if doc.get("label_names") is None else tuple(doc["label_names"])
    return TrainedModel(arr, table, reps, hp, float(doc["objective"]), means, scales, names,
                        doc.get("binaries"), doc.get("status", OPTIMAL), dict(doc.get("extra") or {}))


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())


def binaries_of(model: TrainedModel, dataset: Dataset) -> Binaries:
    """The stored binaries of a trained model, given its training data."""
    if model.binaries is None:
        raise ValueError("model carries no binaries")
    if len(model.binaries["t"]) != dataset.n:
        raise ValueError("model was trained on a different number of observations")
    return Binaries.from_dict(model.binaries, dataset.labels, dataset.k)
