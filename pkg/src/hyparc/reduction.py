"""Clustering-based variable fixing, start heuristics and the math-heuristic driver."""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, Hyperparameters
from .formulation import FixingPlan, apply_fixings, build_model, estimate_big_m
from .solver import (FEASIBLE, OPTIMAL, Binaries, InfeasibleBinariesError, Solution, SolveOptions,
                     _respects, assemble, branch_and_bound, brute_force, complete_assignment, eval_phi,
                     local_search, solution_from_phi)

log = logging.getLogger("hyparc.reduction")


@dataclass(frozen=True)
class Cluster:
    members: tuple
    centroid: np.ndarray
    label: int


@dataclass(frozen=True)
class ClusterModel:
    clusters: tuple
    tau: float

    def __len__(self):
        return len(self.clusters)

    def assignment(self, n: int) -> np.ndarray:
        out = np.full(n, -1)
        for q, c in enumerate(self.clusters):
            out[list(c.members)] = q
        return out

    def centroids(self) -> np.ndarray:
        return np.array([c.centroid for c in self.clusters])

    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.clusters])

    def distance_matrix(self) -> np.ndarray:
        """Squared Euclidean distances between centroids."""
        C = self.centroids()
        return np.sum((C[:, None, :] - C[None, :, :]) ** 2, axis=2)


def default_tau(dataset: Dataset) -> float:
    """10% of the mean squared distance to the overall mean."""
    X = dataset.points
    r2 = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1)))
    return 0.1 * r2 if r2 > 0 else 1.0


def cluster_hierarchical(dataset: Dataset, tau: Optional[float] = None) -> ClusterModel:
    """Agglomerative centroid-linkage clustering inside each class.

    At every step the two closest clusters (squared centroid distance) whose
    union keeps every member within ``tau`` (squared distance) of the merged
    centroid are joined; clustering stops once no such pair is left.
    """
    tau = default_tau(dataset) if tau is None else float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    X, y = dataset.points, dataset.labels
    out = []
    for s in range(1, dataset.k + 1):
        groups = [[int(i)] for i in np.flatnonzero(y == s)]
        while len(groups) > 1:
            cents = np.array([X[g].mean(axis=0) for g in groups])
            d = np.sum((cents[:, None, :] - cents[None, :, :]) ** 2, axis=2)
            iu = np.triu_indices(len(groups), 1)
            order = np.lexsort((iu[1], iu[0], d[iu]))
            merged = False
            for q in order:
                a, b = iu[0][q], iu[1][q]
                g = groups[a] + groups[b]
                c = X[g].mean(axis=0)
                if np.max(np.sum((X[g] - c) ** 2, axis=1)) <= tau:
                    groups[a] = sorted(g)
                    del groups[b]
                    merged = True
                    break
            if not merged:
                break
        for g in sorted(groups):
            out.append(Cluster(tuple(g), X[g].mean(axis=0), s))
    return ClusterModel(tuple(out), tau)


def reduce_h(dataset: Dataset, clusters: ClusterModel, seed: int = 0, scope: str = "class") -> FixingPlan:
    """Keep one randomly chosen representative per cluster.

    ``h_ij`` is fixed to zero for every non-representative ``j != i`` of the
    class of ``i`` (of any class with ``scope="all"``, matching models built
    with the full h grid); the diagonal stays free.
    """
    rng = np.random.default_rng(seed)
    reps = {int(rng.choice(np.array(c.members))) for c in clusters.clusters}
    y = dataset.labels
    zeros = set()
    for i in range(dataset.n):
        for j in (np.flatnonzero(y == y[i]) if scope == "class" else range(dataset.n)):
            j = int(j)
            if j != i and j not in reps:
                zeros.add(("h", i, j))
    return FixingPlan(frozenset(zeros), frozenset(), "alg1", seed)


def representatives_of(plan: FixingPlan, dataset: Dataset) -> set:
    """Observations still allowed to represent others under an h-plan."""
    blocked = {}
    for key in plan.zeros:
        if key[0] == "h":
            blocked.setdefault(key[2], set()).add(key[1])
    y = dataset.labels
    out = set()
    for j in range(dataset.n):
        others = set(np.flatnonzero(y == y[j]).tolist()) - {j}
        if not others or not others <= blocked.get(j, set()):
            out.add(j)
    return out


def h_counts(n: int, n_clusters: int) -> dict:
    """h-variable counts on the full n x n grid (every ordered pair counted).

    ``representative`` counts the columns left free for all rows after one
    representative per cluster is kept, ``self`` the diagonal entries of the
    non-representatives, which stay free as well.
    """
    return {"grid": n * n, "representative": n * n_clusters, "self": n - n_clusters,
            "total": n * n_clusters + n - n_clusters}


def reduce_z(dataset: Dataset, clusters: ClusterModel, theta: Optional[float] = None,
             rule: str = "maxmin") -> FixingPlan:
    """Forbid class assignments between far-apart clusters of different classes.

    For every cluster l (class s) a partner cluster q (class s' != s) is
    chosen and, when their squared centroid distance exceeds ``theta``,
    ``z[i, s'] = 0`` for i in l and ``z[i, s] = 0`` for i in q.

    ``rule="maxmin"`` picks the class whose nearest cluster is farthest and
    that nearest cluster; ``rule="max"`` picks the farthest cross-class
    cluster outright.
    """
    if rule not in ("maxmin", "max"):
        raise ValueError("rule must be 'maxmin' or 'max'")
    cl = clusters.clusters
    labels = clusters.labels()
    if len(set(labels.tolist())) < 2:
        return FixingPlan(provenance="alg2")
    D = clusters.distance_matrix()
    theta = default_theta(clusters) if theta is None else float(theta)
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    zeros = set()
    for l, c in enumerate(cl):
        other = np.flatnonzero(labels != c.label)
        if rule == "max":
            q = int(other[np.argmax(D[l, other])])
        else:
            best = None
            for s in sorted(set(labels[other].tolist())):
                qs = other[labels[other] == s]
                qn = int(qs[np.argmin(D[l, qs])])
                if best is None or D[l, qn] > D[l, best]:
                    best = qn
            q = best
        if D[l, q] <= theta:
            continue
        for i in c.members:
            zeros.add(("z", int(i), int(labels[q]) - 1))
        for i in cl[q].members:
            zeros.add(("z", int(i), int(c.label) - 1))
    # guard: never close every class of an observation
    by_obs = {}
    for key in sorted(zeros):
        by_obs.setdefault(key[1], []).append(key)
    for i, keys in by_obs.items():
        if len(keys) >= dataset.k:
            warnings.warn(f"z-fixings would empty row {i}; dropping {keys[-1]}")
            zeros.discard(keys[-1])
    return FixingPlan(frozenset(zeros), frozenset(), "alg2")


def default_theta(clusters: ClusterModel) -> float:
    """Median squared distance between centroids of different classes."""
    labels = clusters.labels()
    D = clusters.distance_matrix()
    cross = D[labels[:, None] != labels[None, :]]
    return float(np.median(cross)) if cross.size else math.inf


# ----------------------------------------------------------------- starts
def _one_vs_rest(dataset: Dataset, m: int):
    X, y, k = dataset.points, dataset.labels, dataset.k
    sizes = dataset.class_sizes()
    order = sorted(range(1, k + 1), key=lambda s: (-sizes[s - 1], s))
    planes = []
    for s in order[:m]:
        a, b = X[y == s].mean(axis=0), X[y != s].mean(axis=0)
        w = a - b
        planes.append((w, -float(w @ (a + b)) / 2.0))
    # more hyperplanes than classes: bisectors between pairs of class centroids
    pairs = [(s, u) for s in range(1, k + 1) for u in range(s + 1, k + 1)]
    for s, u in pairs:
        if len(planes) >= m:
            break
        a, b = X[y == s].mean(axis=0), X[y == u].mean(axis=0)
        w = a - b
        planes.append((w, -float(w @ (a + b)) / 2.0))
    while len(planes) < m:
        planes.append(planes[len(planes) % max(1, len(planes))])
    W = np.array([p[0] for p in planes])
    return W, np.array([p[1] for p in planes])


def binaries_from_hyperplanes(dataset: Dataset, omega, omega0, m: int, allowed_reps=None,
                              fixings: Optional[FixingPlan] = None) -> Binaries:
    """Signs of the hyperplanes, cell majorities and nearest representatives, repaired to feasibility."""
    vals = dataset.points @ np.atleast_2d(omega).T + np.ravel(omega0)
    t = (vals >= 0).astype(int)
    return repair(dataset, t, m, allowed_reps, fixings)


def _forbidden(fixings, n, k):
    out = np.zeros((n, k), dtype=bool)
    if fixings is not None:
        for key in fixings.zeros:
            if key[0] == "z":
                out[key[1], key[2]] = True
    return out


def repair(dataset: Dataset, t, m: int, allowed_reps=None, fixings=None) -> Binaries:
    """Class map by cell majority, then fixes so that every class keeps a well-classified cell."""
    y, n, k = dataset.labels, dataset.n, dataset.k
    t = np.array(t, dtype=int)
    forbid = _forbidden(fixings, n, k)
    reps_ok = set(range(n)) if allowed_reps is None else set(allowed_reps)

    def class_map(t):
        cls = np.empty(n, dtype=int)
        for row in sorted(set(map(tuple, t))):
            mem = np.flatnonzero((t == row).all(axis=1))
            counts = np.bincount(y[mem], minlength=k + 1)[1:].astype(float)
            counts[forbid[mem].any(axis=0)] = -1
            cls[mem] = int(np.argmax(counts)) + 1
        return cls

    cls = class_map(t)
    for _ in range(2 * k + 2):
        good = (cls == y)
        missing = [s for s in range(1, k + 1)
                   if not any(good[j] and j in reps_ok for j in np.flatnonzero(y == s))]
        if not missing:
            break
        s = missing[0]
        used = set(map(tuple, t))
        free = [p for p in _patterns(m) if p not in used]
        cand = [j for j in np.flatnonzero(y == s) if j in reps_ok]
        if free and cand:
            # move one observation of the class to an empty cell
            t[cand[0]] = free[0]
            cls = class_map(t)
            if cls[cand[0]] != s:
                cls[cand[0]] = s
            continue
        # otherwise hand the class one of the cells it occupies
        counts = {}
        for j in cand:
            counts.setdefault(tuple(t[j]), []).append(j)
        row = max(sorted(counts), key=lambda q: len(counts[q]))
        mem = np.flatnonzero((t == row).all(axis=1))
        if forbid[mem, s - 1].any():
            break
        cls[mem] = s
    try:
        b = complete_assignment(dataset, t, cls)
        b = _restrict_reps(dataset, b, reps_ok)
        if fixings is not None and not _respects(b, fixings):
            raise InfeasibleBinariesError("start breaks the fixings")
        return b
    except InfeasibleBinariesError:
        return coded_start(dataset, m)


def _restrict_reps(dataset, b: Binaries, reps_ok) -> Binaries:
    y, X = dataset.labels, dataset.points
    rep = b.representative.copy()
    for i in np.flatnonzero(b.xi):
        ok = [j for j in np.flatnonzero((y == y[i]) & (b.xi == 0)) if j in reps_ok]
        if not ok:
            raise InfeasibleBinariesError("no admissible representative")
        if rep[i] not in ok:
            rep[i] = ok[int(np.argmin(np.sum((X[ok] - X[i]) ** 2, axis=1)))]
    return complete_assignment(dataset, b.t, b.classes, rep)


def _patterns(m):
    return [tuple((q >> r) & 1 for r in range(m)) for q in range(2 ** m)]


def coded_start(dataset: Dataset, m: int) -> Binaries:
    """Every class in its own cell (binary code of the class id); needs 2^m >= k."""
    if 2 ** m < dataset.k:
        raise InfeasibleBinariesError(f"{m} hyperplanes give at most {2 ** m} cells for {dataset.k} classes")
    codes = np.array(_patterns(m))
    t = codes[dataset.labels - 1]
    return complete_assignment(dataset, t, dataset.labels)


def initial_solution(dataset: Dataset, params: Hyperparameters, T: Optional[float] = None,
                     fixings: Optional[FixingPlan] = None, allowed_reps=None):
    """One-vs-rest centroid hyperplanes turned into feasible binaries; returns (binaries, Solution)."""
    W, W0 = _one_vs_rest(dataset, params.m)
    b = binaries_from_hyperplanes(dataset, W, W0, params.m, allowed_reps, fixings)
    phi = eval_phi(dataset, params, b, T)
    return b, solution_from_phi(b, phi, FEASIBLE)


def centroid_start(dataset: Dataset, params: Hyperparameters, clusters: ClusterModel, T=None,
                   fixings=None, allowed_reps=None, max_points: int = 6):
    """Solve the problem exactly on coarse cluster centroids and lift the hyperplanes.

    The clustering threshold is raised until at most ``max_points`` centroids
    remain.  Returns (binaries, Solution) or None when not applicable.
    """
    if params.m > 2 or dataset.k > 3 or 2 ** params.m < dataset.k:
        return None
    tau = clusters.tau
    cm = clusters
    for _ in range(40):
        if len(cm) <= max_points:
            break
        tau *= 2.0
        cm = cluster_hierarchical(dataset, tau)
    if len(cm) > max_points:
        return None
    cents = Dataset(cm.centroids(), cm.labels(), dataset.k)
    if cents.n < 2:
        return None
    sol = brute_force(cents, params)
    if not sol.has_incumbent:
        return None
    b = binaries_from_hyperplanes(dataset, sol.omega, sol.omega0, params.m, allowed_reps, fixings)
    phi = eval_phi(dataset, params, b, T)
    return b, solution_from_phi(b, phi, FEASIBLE)


def math_heuristic(dataset: Dataset, params: Hyperparameters, tau: Optional[float] = None,
                   theta: Optional[float] = None, options: Optional[SolveOptions] = None,
                   seed: int = 0, exact: str = "auto", T: Optional[float] = None,
                   reduce: bool = True) -> Solution:
    """Cluster, fix h and z variables, build a start and solve the reduced model.

    ``exact`` is ``"auto"`` (branch-and-bound up to 8 observations, local
    search beyond), ``"bb"`` or ``"local"``.  The result is feasible for the
    unreduced model.
    """
    opts = options or SolveOptions(seed=seed)
    start = time.perf_counter()
    T = estimate_big_m(dataset, params) if T is None else float(T)
    clusters = cluster_hierarchical(dataset, tau)
    if reduce:
        plan = reduce_h(dataset, clusters, seed).merge(reduce_z(dataset, clusters, theta))
    else:
        plan = FixingPlan(provenance="manual")
    reps = representatives_of(plan, dataset)
    starts = [initial_solution(dataset, params, T, plan, reps)]
    cs = centroid_start(dataset, params, clusters, T, plan, reps)
    if cs is not None:
        starts.append(cs)
    starts = [s for s in starts if _respects(s[0], plan)]
    best_b, best = min(starts, key=lambda s: s[1].objective) if starts else (None, None)
    mode = exact
    if mode == "auto":
        mode = "bb" if dataset.n <= 8 else "local"
    info = {"clusters": len(clusters), "tau": clusters.tau, "fixed": len(plan), "mode": mode,
            "start_objective": None if best is None else best.objective}
    if mode == "bb":
        model = apply_fixings(build_model(dataset, params, T), plan)
        warm = None
        if best_b is not None:
            warm = assemble(model, best_b, eval_phi(dataset, params, best_b, T))
        sol = branch_and_bound(model, opts, warm)
        if not sol.has_incumbent:
            return sol
        out = Solution(sol.binaries, sol.omega, sol.omega0, sol.e, sol.d, sol.objective, -math.inf,
                       FEASIBLE if sol.status == OPTIMAL else sol.status, sol.nodes,
                       time.perf_counter() - start, sol.x, T, sol.big_m_flag, info)
        return out
    if best_b is None:
        best_b = coded_start(dataset, params.m)
    sol = local_search(dataset, params, best_b, opts, T, fixings=plan)
    info.update(sol.info)
    return Solution(sol.binaries, sol.omega, sol.omega0, sol.e, sol.d, sol.objective, -math.inf, FEASIBLE,
                    0, time.perf_counter() - start, None, T, sol.big_m_flag, info)
