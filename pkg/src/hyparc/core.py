"""Shared domain types and reference computations for hyperplane arrangements.

Labels are integers in ``1..k`` throughout the package.  Sign patterns are
tuples of ``+1``/``-1`` with the convention ``sign(0) = +1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NORMS = ("l1", "l2")
LOSSES = ("hinge", "ramp")


class DimensionError(ValueError):
    pass


class DegenerateModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled observations, already (optionally) z-score normalized.

    ``means``/``scales`` hold the normalization that produced ``points`` from
    the raw features; they are identity when no normalization was applied.
    """

    points: np.ndarray
    labels: np.ndarray
    k: int
    feature_names: Optional[tuple] = None
    label_names: Optional[tuple] = None
    means: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.points, dtype=float))
        y = np.asarray(self.labels, dtype=int).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} points but {y.shape[0]} labels")
        if X.shape[1] < 1:
            raise DimensionError("points need at least one feature")
        if not np.all(np.isfinite(X)):
            raise ValueError("points must be finite")
        k = int(self.k)
        if y.size and (y.min() < 1 or y.max() > k):
            raise ValueError(f"labels must lie in 1..{k}")
        missing = sorted(set(range(1, k + 1)) - set(y.tolist()))
        if missing:
            raise ValueError(f"classes {missing} have no observations")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "k", k)
        p = X.shape[1]
        means = np.zeros(p) if self.means is None else np.asarray(self.means, float)
        scales = np.ones(p) if self.scales is None else np.asarray(self.scales, float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def onehot(self) -> np.ndarray:
        """The class encodings delta_i as an ``(n, k)`` 0/1 matrix."""
        delta = np.zeros((self.n, self.k), dtype=int)
        delta[np.arange(self.n), self.labels - 1] = 1
        return delta

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels - 1, minlength=self.k)

    def subset(self, index) -> "Dataset":
        """Rows ``index`` as a new dataset with labels compacted to 1..k'."""
        index = np.asarray(index, dtype=int)
        y = self.labels[index]
        present = np.unique(y)
        remap = {int(c): i + 1 for i, c in enumerate(present)}
        names = None
        if self.label_names is not None:
            names = tuple(self.label_names[int(c) - 1] for c in present)
        return Dataset(self.points[index], np.array([remap[int(c)] for c in y]),
                       len(present), self.feature_names, names, self.means, self.scales)

    def with_points(self, points) -> "Dataset":
        return Dataset(points, self.labels, self.k, None, self.label_names)


def make_dataset(X, y, normalize: bool = True, feature_names=None) -> Dataset:
    """Build a :class:`Dataset` from raw arrays, re-encoding labels by first appearance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    raw = list(np.asarray(y).ravel())
    order = {}
    for v in raw:
        order.setdefault(v, len(order) + 1)
    labels = np.array([order[v] for v in raw], dtype=int)
    means, scales = None, None
    if normalize:
        means, scales = zscore_stats(X)
        X = (X - means) / scales
    return Dataset(X, labels, len(order), None if feature_names is None else tuple(feature_names),
                   tuple(order), means, scales)


def zscore_stats(X: np.ndarray):
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    flat = scales < 1e-12
    if np.any(flat):
        warnings.warn(f"constant feature column(s) {np.flatnonzero(flat).tolist()}; scale set to 1.0")
        scales = np.where(flat, 1.0, scales)
    return means, scales


@dataclass(frozen=True)
class Hyperplane:
    coefficients: tuple
    intercept: float

    def __post_init__(self):
        w = tuple(float(v) for v in np.ravel(self.coefficients))
        if not all(np.isfinite(w)) or not np.isfinite(self.intercept):
            raise ValueError("hyperplane coefficients must be finite")
        object.__setattr__(self, "coefficients", w)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def is_null(self) -> bool:
        return not any(self.coefficients)

    def value(self, x) -> float:
        return float(np.dot(self.coefficients, x) + self.intercept)


@dataclass(frozen=True)
class Arrangement:
    hyperplanes: tuple
    norm: str = "l2"

    def __post_init__(self):
        hs = tuple(self.hyperplanes)
        if not hs:
            raise ValueError("an arrangement needs at least one hyperplane")
        if len({len(h.coefficients) for h in hs}) != 1:
            raise DimensionError("hyperplanes of mixed dimension")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        object.__setattr__(self, "hyperplanes", hs)

    @classmethod
    def from_arrays(cls, omega, omega0, norm="l2") -> "Arrangement":
        omega = np.atleast_2d(omega)
        return cls(tuple(Hyperplane(w, b) for w, b in zip(omega, np.ravel(omega0))), norm)

    @property
    def m(self) -> int:
        return len(self.hyperplanes)

    @property
    def p(self) -> int:
        return len(self.hyperplanes[0].coefficients)

    @property
    def omega(self) -> np.ndarray:
        return np.array([h.coefficients for h in self.hyperplanes])

    @property
    def omega0(self) -> np.ndarray:
        return np.array([h.intercept for h in self.hyperplanes])

    def values(self, X) -> np.ndarray:
        """Affine values ``omega_r^t x + omega_r0`` as an ``(n, m)`` array."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise DimensionError(f"expected dimension {self.p}, got {X.shape[1]}")
        return X @ self.omega.T + self.omega0

    def null_hyperplanes(self) -> list:
        return [r for r, h in enumerate(self.hyperplanes) if h.is_null]


def sign_pattern(arrangement: Arrangement, x) -> tuple:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != arrangement.p:
        raise DimensionError(f"expected dimension {arrangement.p}, got {x.size}")
    vals = arrangement.values(x[None, :])[0]
    return tuple(1 if v >= 0 else -1 for v in vals)


def sign_patterns(arrangement: Arrangement, X) -> np.ndarray:
    return np.where(arrangement.values(X) >= 0, 1, -1)


def dual_norm(w, norm: str) -> float:
    # l2 is self-dual; the dual of l1 is the max-norm
    w = np.asarray(w, dtype=float)
    if norm == "l2":
        return float(np.linalg.norm(w))
    if norm == "l1":
        return float(np.max(np.abs(w))) if w.size else 0.0
    raise ValueError(f"unknown norm {norm!r}")


def margin_objective(arrangement: Arrangement) -> float:
    """The margin term the model minimises: max_r of ||w_r||^2 / 2 (l2) or ||w_r||_inf (l1)."""
    if arrangement.norm == "l1":
        return max(dual_norm(h.coefficients, "l1") for h in arrangement.hyperplanes)
    return max(0.5 * dual_norm(h.coefficients, "l2") ** 2 for h in arrangement.hyperplanes)


@dataclass(frozen=True)
class Hyperparameters:
    m: int = 2
    C1: float = 1.0
    C2: Optional[float] = None
    norm: str = "l2"
    loss: str = "hinge"

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValueError("m must be >= 1")
        object.__setattr__(self, "m", int(self.m))
        if self.C2 is None:
            object.__setattr__(self, "C2", self.m * float(self.C1))
        if self.C1 < 0 or self.C2 < 0:
            raise ValueError("C1 and C2 must be nonnegative")
        object.__setattr__(self, "C1", float(self.C1))
        object.__setattr__(self, "C2", float(self.C2))
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.loss == "ramp" and not self.C1 < self.C2:
            warnings.warn("ramp-loss models are usually run with C1 < C2")

    def as_dict(self) -> dict:
        return {"m": self.m, "C1": self.C1, "C2": self.C2, "norm": self.norm, "loss": self.loss}


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted arrangement together with its suitable assignment.

    ``representatives`` lists ``(pattern, class, point)`` for every well
    classified training observation; ``cell_table`` maps each of their
    patterns to its class.
    """

    arrangement: Arrangement
    cell_table: dict
    representatives: tuple
    hyperparams: Hyperparameters
    objective: float
    means: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None
    label_names: Optional[tuple] = None
    binaries: Optional[dict] = None
    status: str = "optimal"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        table = {}
        for pattern, cls, _ in self.representatives:
            pattern = tuple(int(s) for s in pattern)
            if table.setdefault(pattern, int(cls)) != int(cls):
                raise DegenerateModelError(f"pattern {pattern} maps to two classes")
        if set(table) != set(self.cell_table) or any(table[q] != self.cell_table[q] for q in table):
            raise DegenerateModelError("cell table does not match representatives")

    @property
    def classes(self) -> list:
        return sorted(set(self.cell_table.values()))


def loss_terms(model: TrainedModel, dataset: Dataset):
    """Recompute in-margin (e) and out-margin (d) losses from first principles.

    Each observation's target cell is the class-``y`` cell of its closest
    representative under the decision-rule metric (sum of absolute affine
    values over disagreeing hyperplanes).  Returns ``(e, d)`` of shape (n, m).
    """
    arr = model.arrangement
    vals = arr.values(dataset.points)
    s = np.where(vals >= 0, 1, -1)
    reps = {}
    for pattern, cls, _ in model.representatives:
        reps.setdefault(int(cls), set()).add(tuple(pattern))
    e = np.zeros_like(vals)
    d = np.zeros_like(vals)
    for i in range(dataset.n):
        y = int(dataset.labels[i])
        cells = sorted(reps.get(y, ()))
        if not cells:
            raise DegenerateModelError(f"class {y} has no representative")
        own = tuple(s[i])
        if own in cells:
            target = np.array(own)
        else:
            costs = [np.abs(vals[i])[np.array(c) != s[i]].sum() for c in cells]
            target = np.array(cells[int(np.argmin(costs))])
        same = s[i] == target
        e[i] = np.where(same, np.maximum(0.0, 1.0 - s[i] * vals[i]), 0.0)
        d[i] = np.where(same, 0.0, 1.0 - target * vals[i])
    return e, d


def check_points(X, p: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != p:
        raise DimensionError(f"expected dimension {p}, got {X.shape[1]}")
    return X


def as_index_array(values: Sequence[int]) -> np.ndarray:
    return np.asarray(values, dtype=int).ravel()
