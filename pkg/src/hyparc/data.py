"""Data ingestion, synthetic clouds, cross-validation and a proportion test."""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Dataset, Hyperparameters, make_dataset

C_GRID = (0.1, 0.5, 1.0, 5.0, 10.0)


def read_table(path, label_column=-1):
    """Raw features, label strings (or None) and feature names from a CSV.

    ``label_column`` is a column name, an index, or None when the file has
    no label column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one data row")
    header, body = rows[0], rows[1:]
    width = len(header)
    for q, r in enumerate(body, start=2):
        if len(r) != width:
            raise ValueError(f"{path}: line {q} has {len(r)} fields, expected {width}")
    if label_column is None:
        lc = None
    elif isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        lc = header.index(label_column)
    else:
        lc = int(label_column) % width
    feats = [j for j in range(width) if j != lc]
    try:
        X = np.array([[float(r[j]) for j in feats] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric feature value ({exc})") from None
    labels = None if lc is None else [r[lc].strip() for r in body]
    return X, labels, [header[j] for j in feats]


def load_csv(path, label_column=-1, normalize: bool = True) -> Dataset:
    """Read a CSV with a header row; ``label_column`` is a name or an index."""
    X, labels, names = read_table(path, label_column)
    if labels is None:
        raise ValueError("a label column is required")
    if len(set(labels)) < 2:
        raise ValueError(f"{path}: a single class; nothing to classify")
    return make_dataset(X, labels, normalize, names)


def save_csv(dataset: Dataset, path, label_name: str = "label") -> None:
    """Write raw (de-normalized) features and original label names."""
    X = dataset.points * dataset.scales + dataset.means
    names = list(dataset.feature_names or [f"x{j + 1}" for j in range(dataset.p)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + [label_name])
        for x, y in zip(X, dataset.labels):
            lab = dataset.label_names[y - 1] if dataset.label_names is not None else int(y)
            w.writerow([repr(float(v)) for v in x] + [lab])


def generate_clouds(classes: int, clouds: int, n: int, p: int, separation: float = 6.0,
                    seed: int = 0, return_clouds: bool = False):
    """Unit-covariance Gaussian clouds centred on random lattice points.

    Centres are distinct points of the integer lattice ``{0..L-1}^p`` (the
    smallest L with enough points) scaled by ``separation``.  Each cloud gets
    a class, every class at least once; points are split as evenly as
    possible across clouds.  Features are not normalized.  With
    ``return_clouds`` the cloud index of every point is returned as well.
    """
    if classes < 2 or clouds < classes:
        raise ValueError("need clouds >= classes >= 2")
    if n < clouds:
        raise ValueError("need at least one point per cloud")
    if p < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    side = 2
    while side ** p < clouds:
        side += 1
    if side ** p <= 10 ** 6:
        grid = np.array(list(itertools.product(range(side), repeat=p)), dtype=float)
        centres = grid[rng.choice(len(grid), size=clouds, replace=False)]
    else:
        seen, pts = set(), []
        while len(pts) < clouds:
            c = tuple(rng.integers(0, side, size=p).tolist())
            if c not in seen:
                seen.add(c)
                pts.append(c)
        centres = np.array(pts, dtype=float)
    centres *= separation
    cls = np.concatenate([rng.permutation(classes) + 1, rng.integers(1, classes + 1, size=clouds - classes)])
    cls = cls[rng.permutation(clouds)]
    sizes = np.full(clouds, n // clouds)
    sizes[: n % clouds] += 1
    X = np.vstack([centres[c] + rng.standard_normal((sizes[c], p)) for c in range(clouds)])
    y = np.repeat(cls, sizes)
    order = rng.permutation(n)
    data = Dataset(X[order], y[order], classes, tuple(f"x{j + 1}" for j in range(p)),
                   tuple(str(s) for s in range(1, classes + 1)))
    if return_clouds:
        return data, np.repeat(np.arange(clouds), sizes)[order]
    return data


def kfold_split(labels, folds: int, seed: int = 0):
    """Seeded stratified folds as a list of ``(train, test)`` index arrays."""
    y = np.asarray(labels.labels if isinstance(labels, Dataset) else labels)
    n = y.size
    if folds < 2 or folds > n:
        raise ValueError("need 2 <= folds <= n")
    rng = np.random.default_rng(seed)
    order = []
    for s in np.unique(y):
        idx = np.flatnonzero(y == s)
        if idx.size < folds:
            warnings.warn(f"class {s} has {idx.size} observations for {folds} folds")
        order.extend(rng.permutation(idx).tolist())
    fold_of = np.empty(n, dtype=int)
    fold_of[np.array(order)] = np.arange(n) % folds
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(folds)]


def parameter_grid(k: int, m_grid=None, c_grid=None, loss: str = "hinge", norm: str = "l2"):
    """Grid cells in search order; hinge uses C1 = C2, ramp every C1 < C2."""
    m_grid = tuple(range(2, max(k, 2) + 1)) if m_grid is None else tuple(m_grid)
    c_grid = C_GRID if c_grid is None else tuple(c_grid)
    cells = []
    for m in m_grid:
        if loss == "hinge":
            pairs = [(c, c) for c in c_grid]
        else:
            pairs = [(a, b) for a in c_grid for b in c_grid if a < b]
        for c1, c2 in pairs:
            cells.append(Hyperparameters(m=m, C1=c1, C2=c2, norm=norm, loss=loss))
    return cells


@dataclass
class GridResult:
    best: Hyperparameters
    table: dict
    outer_acc: list
    fold_best: list
    failures: list = field(default_factory=list)

    @property
    def mean_acc(self) -> float:
        return float(np.mean(self.outer_acc)) if self.outer_acc else float("nan")


def _cell_key(hp: Hyperparameters):
    return (hp.m, hp.C1, hp.C2)


def _pick(scores: dict):
    """Lowest mean error; ties go to smaller m, then smaller C1, then smaller C2."""
    return min(scores, key=lambda key: (round(100.0 - scores[key], 9), key[0], key[1], key[2]))


def _fit_predict(trainer, data: Dataset, train, test, hp):
    sub = data.subset(train)
    present = np.unique(data.labels[train])
    if 2 ** hp.m < sub.k:
        raise ValueError(f"m={hp.m} cannot separate {sub.k} classes")
    model = trainer(sub, hp)
    from .classify import predict_batch
    pred = present[predict_batch(model, data.points[test], normalized=True) - 1]
    return float(np.mean(pred == data.labels[test]) * 100.0)


def grid_search_cv(dataset: Dataset, m_grid=None, c_grid=None, outer_folds: int = 5, inner_folds: int = 4,
                   options=None, loss: str = "hinge", norm: str = "l2", seed: int = 0,
                   trainer: Optional[Callable] = None) -> GridResult:
    """Outer folds for testing, inner folds on each training part to choose (m, C1, C2)."""
    if trainer is None:
        from .classify import default_trainer
        trainer = default_trainer(options, seed)
    cells = parameter_grid(dataset.k, m_grid, c_grid, loss, norm)
    if not cells:
        raise ValueError("empty grid")
    sums = {}
    outer_acc, fold_best, failures = [], [], []
    for f, (tr, te) in enumerate(kfold_split(dataset, outer_folds, seed)):
        inner = kfold_split(dataset.labels[tr], inner_folds, seed + 1 + f)
        scores = {}
        for hp in cells:
            accs = []
            try:
                for itr, ite in inner:
                    accs.append(_fit_predict(trainer, dataset, tr[itr], tr[ite], hp))
            except Exception as exc:  # recorded, cell skipped
                warnings.warn(f"fold {f}, cell {_cell_key(hp)} failed: {exc}")
                failures.append((f, _cell_key(hp), str(exc)))
                continue
            scores[_cell_key(hp)] = float(np.mean(accs))
            sums.setdefault(_cell_key(hp), []).append(scores[_cell_key(hp)])
        if not scores:
            raise RuntimeError(f"every grid cell failed on outer fold {f}")
        key = _pick(scores)
        hp = Hyperparameters(m=key[0], C1=key[1], C2=key[2], norm=norm, loss=loss)
        fold_best.append(hp)
        outer_acc.append(_fit_predict(trainer, dataset, tr, te, hp))
    table = {key: float(np.mean(v)) for key, v in sums.items()}
    key = _pick(table)
    best = Hyperparameters(m=key[0], C1=key[1], C2=key[2], norm=norm, loss=loss)
    return GridResult(best, table, outer_acc, fold_best, failures)


@dataclass(frozen=True)
class ProportionTest:
    z: float
    p_value: float
    degenerate: bool = False


def proportion_test(acc_a: float, n_a: int, acc_b: float, n_b: int) -> ProportionTest:
    """Pooled two-sample z-test on correct-classification counts (accuracies in percent)."""
    if n_a < 1 or n_b < 1:
        raise ValueError("sample sizes must be >= 1")
    for acc in (acc_a, acc_b):
        if not 0.0 <= acc <= 100.0:
            raise ValueError("accuracies must lie in [0, 100]")
    x_a, x_b = acc_a / 100.0 * n_a, acc_b / 100.0 * n_b
    pooled = (x_a + x_b) / (n_a + n_b)
    if pooled <= 0.0 or pooled >= 1.0:
        return ProportionTest(0.0, 1.0, True)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b))
    z = (x_a / n_a - x_b / n_b) / se
    return ProportionTest(z, math.erfc(abs(z) / math.sqrt(2.0)))
