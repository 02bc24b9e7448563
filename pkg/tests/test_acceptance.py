"""Acceptance suite: nine criteria, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
Expensive computations (brute force, branch-and-bound) are cached and shared
between criteria.
"""

import functools
import itertools
import json
import os
import subprocess
import sys
import tempfile
import time
import warnings

import numpy as np
import pytest
from scipy.stats import ortho_group

sys.path.insert(0, os.path.dirname(__file__))

from conftest import random_instance, random_trained_model  # noqa: E402

from hyparc import classify as C  # noqa: E402
from hyparc import duality as Du  # noqa: E402
from hyparc.core import Hyperparameters, make_dataset, sign_patterns  # noqa: E402
from hyparc.data import generate_clouds  # noqa: E402
from hyparc.formulation import apply_fixings, build_model, h_variable_count, validate_solution  # noqa: E402
from hyparc.reduction import cluster_hierarchical, math_heuristic, reduce_h, representatives_of  # noqa: E402
from hyparc.solver import (InfeasibleBinariesError, SolveOptions, assemble, branch_and_bound, brute_force,  # noqa: E402
                           check_binaries, complete_assignment, eval_phi)

N_ORACLE = 100
N_DUAL = 24
N_EMPTY = 60
N_KERNEL = 10
N_HEUR = 50

RESULTS = {}


def _line(num, name, ok, detail):
    text = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name} :: {detail}"
    RESULTS[num] = (ok, text)
    return text


def report(capsys, num, name, ok, detail):
    text = _line(num, name, ok, detail)
    if capsys is None:
        print(text, flush=True)
    else:
        with capsys.disabled():
            print("\n" + text, flush=True)
    assert ok, text


# ------------------------------------------------------------ shared suites
@functools.lru_cache(maxsize=None)
def oracle_suite():
    """Suite 1: branch-and-bound and brute force on seeded l1 hinge instances."""
    out = []
    for seed in range(N_ORACLE):
        d, hp = random_instance(seed)
        model = build_model(d, hp)
        bb = branch_and_bound(model, SolveOptions(time_limit=300))
        bf = brute_force(d, hp, model.T)
        out.append((seed, d, hp, model, bb, bf))
    return out


def xor_split(seed=3):
    data, cloud = generate_clouds(2, 4, 200, 2, seed=seed, return_clouds=True)
    rng = np.random.default_rng(seed)
    train = np.sort(np.concatenate([rng.choice(np.flatnonzero(cloud == c), 10, replace=False)
                                    for c in range(4)]))
    test = np.setdiff1d(np.arange(data.n), train)
    return data, train, test


def best_line_accuracy(P, labels):
    """Exact best training accuracy of one line in the plane.

    An optimal separating line can be moved until it passes through two data
    points; each of those two points may then sit on either side.
    """
    best = 0.0
    for i, j in itertools.combinations(range(len(P)), 2):
        dvec = P[j] - P[i]
        normal = np.array([-dvec[1], dvec[0]])
        f = (P - P[i]) @ normal
        for a, b in itertools.product((-1.0, 1.0), repeat=2):
            s = f.copy()
            s[i], s[j] = a, b
            for pos in (1, 2):
                pred = np.where(s > 0, pos, 3 - pos)
                best = max(best, float(np.mean(pred == labels)))
    return 100.0 * best


@functools.lru_cache(maxsize=None)
def xor_suite():
    data, tr, te = xor_split()
    X, y = data.points, data.labels
    train = make_dataset(X[tr], y[tr])
    names = list(train.label_names)
    y_test = np.array([names.index(v) + 1 for v in y[te]])
    start = time.perf_counter()
    model = C.train(train, Hyperparameters(m=2, C1=1.0, norm="l2"), heuristic="on", seed=0)
    wall = time.perf_counter() - start
    acc_train = C.accuracy(C.predict_batch(model, X[tr]), train.labels)
    acc_test = C.accuracy(C.predict_batch(model, X[te]), y_test)
    return train, model, acc_train, acc_test, best_line_accuracy(X[tr], train.labels), wall


def random_binaries(d, m, rng):
    for _ in range(100):
        t = rng.integers(0, 2, size=(d.n, m))
        first = {}
        for row, y in zip(map(tuple, t), d.labels):
            first.setdefault(row, int(y))
        cls = np.array([first[tuple(row)] for row in t])
        try:
            return complete_assignment(d, t, cls)
        except InfeasibleBinariesError:
            continue
    raise RuntimeError("no feasible binaries drawn")


@functools.lru_cache(maxsize=None)
def duality_suite():
    """Suite 3: l2 instances with random feasible binaries."""
    out = []
    for seed in range(N_DUAL):
        loss = "hinge" if seed % 2 == 0 else "ramp"
        d, hp = random_instance(1000 + seed, n_range=(4, 11), m_range=(2, 3), norm="l2", loss=loss)
        b = random_binaries(d, hp.m, np.random.default_rng(seed))
        rep = Du.verify_strong_duality(d, hp, b)
        out.append((seed, d, hp, b, rep, eval_phi(d, hp, b)))
    return out


# ----------------------------------------------------------------- criteria
def criterion_1(capsys=None):
    suite = oracle_suite()
    diffs = [abs(bb.objective - bf.objective) for _, _, _, _, bb, bf in suite]
    ok_status = all(bb.status == "optimal" for _, _, _, _, bb, _ in suite)
    hits = sum(dv <= 1e-6 for dv in diffs)
    ok = len(suite) >= 100 and hits == len(suite) and ok_status
    report(capsys, 1, "oracle equivalence", ok,
           f"{hits}/{len(suite)} instances |B&B - brute force| <= 1e-6 (max {max(diffs):.1e})")


def criterion_2(capsys=None):
    train, model, acc_train, acc_test, best1, wall = xor_suite()
    ok = acc_train == 100.0 and acc_test >= 90.0 and best1 <= 80.0 and wall <= 300
    report(capsys, 2, "XOR separability", ok,
           f"m=2 train {acc_train:.2f}% test {acc_test:.2f}% (160 pts); best m=1 train {best1:.2f}%; "
           f"{wall:.1f}s")


def criterion_3(capsys=None):
    suite = duality_suite()
    worst = {}
    for _, _, _, _, rep, _ in suite:
        for key, v in rep.residuals.items():
            worst[key] = max(worst.get(key, 0.0), v)
    passed = sum(rep.passed for *_, rep, _ in suite)
    ok = len(suite) >= 20 and passed == len(suite) and max(worst.values()) <= 1e-6
    report(capsys, 3, "strong duality", ok,
           f"{passed}/{len(suite)} certificates; gap {worst['duality_gap']:.1e}, "
           f"reconstruction {worst['reconstruction']:.1e}, max residual {max(worst.values()):.1e}")


def _error_bounds(e, d, t, rep):
    e_ok = float(e.min()) >= -1e-9 and float(e.max()) <= 1 + 1e-6
    active = (t != t[rep]) & (np.arange(len(rep)) != rep)[:, None]
    d_ok = bool(np.all(d[active] >= 1 - 1e-6)) if d is not None and active.any() else True
    return e_ok, d_ok, float(e.max()), int(active.sum())


def criterion_4(capsys=None):
    checked, bad, e_max, n_active = 0, [], 0.0, 0
    for seed, d, hp, model, bb, bf in oracle_suite():
        for tag, sol in (("bb", bb), ("bf", bf)):
            lay = model.layout
            e = sol.e if sol.e is not None else lay.matrix(sol.x, "e", (d.n, hp.m))
            dd = sol.d if sol.d is not None else lay.matrix(sol.x, "d", (d.n, hp.m))
            e_ok, d_ok, em, na = _error_bounds(e, dd, sol.binaries.t, sol.binaries.representative)
            checked, e_max, n_active = checked + 1, max(e_max, em), n_active + na
            if not (e_ok and d_ok):
                bad.append((1, seed, tag))
    train, model, *_ = xor_suite()
    b = C.binaries_of(model, train)
    phi = eval_phi(train, model.hyperparams, b, model.extra["T"])
    e_ok, d_ok, em, na = _error_bounds(phi.e, phi.d, b.t, b.representative)
    checked, e_max, n_active = checked + 1, max(e_max, em), n_active + na
    if not (e_ok and d_ok):
        bad.append((2, 0, "xor"))
    for seed, d, hp, b, _, phi in duality_suite():
        dd = phi.d if hp.loss == "hinge" else None
        e_ok, d_ok, em, na = _error_bounds(phi.e, dd, b.t, b.representative)
        checked, e_max, n_active = checked + 1, max(e_max, em), n_active + na
        if not (e_ok and d_ok):
            bad.append((3, seed, hp.loss))
    ok = not bad
    report(capsys, 4, "error-variable bounds", ok,
           f"{checked} solutions from suites 1-3; max e {e_max:.6f}; {n_active} active d checked; "
           f"violations {bad[:3]}")


def h_count_instance():
    # 4 classes, 24 points, 6 tight groups: classes 1 and 2 split in two groups each
    rng = np.random.default_rng(0)
    centres = [(0, 0), (0, 3), (4, 0), (4, 3), (8, 0), (8, 3)]
    sizes = [3, 3, 3, 3, 6, 6]
    X = np.vstack([rng.normal(c, 0.1, (s, 2)) for c, s in zip(centres, sizes)])
    return make_dataset(X, np.repeat([1, 1, 2, 2, 3, 4], sizes), normalize=False)


def criterion_5(capsys=None):
    d = h_count_instance()
    hp = Hyperparameters(m=2, norm="l1")
    full = build_model(d, hp, h_scope="all")
    clusters = cluster_hierarchical(d, 0.5)
    plan = reduce_h(d, clusters, seed=0, scope="all")
    reduced = apply_fixings(full, plan)
    free_full = h_variable_count(full)
    free_red = h_variable_count(reduced)
    reps = representatives_of(plan, d)
    cols = reduced.layout.block("h")
    to_reps = sum(1 for key, c in reduced.layout.index.items()
                  if key[0] == "h" and key[2] in reps and reduced.ub[c] > reduced.lb[c])
    self_only = free_red - to_reps
    ok = (d.n == 24 and d.k == 4 and len(clusters) == 6 and free_full == 576 and to_reps == 144
          and self_only == 18 and free_red == 24 * 6 + 18 and len(cols) == 576)
    report(capsys, 5, "h-variable count", ok,
           f"unreduced {free_full}; after cluster reduction ({len(clusters)} clusters): {to_reps} columns to "
           f"representatives + {self_only} self columns = {free_red} free (144 = 24x6; 24x6+18 = 162)")


def criterion_6(capsys=None):
    queries, agree, seed = 0, 0, 0
    while queries < N_EMPTY:
        model = random_trained_model(seed, m=int(2 + seed % 3), n_reps=int(3 + seed % 4))
        X = np.random.default_rng(10_000 + seed).normal(size=(20, 2)) * 3
        for x, s in zip(X, sign_patterns(model.arrangement, X)):
            if tuple(int(v) for v in s) in model.cell_table:
                continue
            queries += 1
            agree += int(C.predict(model, x) == C.predict_lp(model, x))
        seed += 1
    ok = queries >= 50 and agree == queries
    report(capsys, 6, "decision-rule exactness", ok,
           f"{agree}/{queries} empty-cell queries: enumeration class == assignment-LP class ({seed} models)")


@functools.lru_cache(maxsize=None)
def kernel_suite():
    out = []
    for seed in range(N_KERNEL):
        rng = np.random.default_rng(seed)
        y = np.array([1, 2] * 5)
        rng.shuffle(y)
        d = make_dataset(rng.normal(size=(10, 2)), y, normalize=False)
        mapped = Du.feature_map_poly2(d)
        hp = Hyperparameters(m=2, C1=1.0, norm="l2")
        model = C.train(mapped, hp, heuristic="on", seed=seed)
        b = C.binaries_of(model, mapped)
        T = model.extra["T"]
        cert = Du.extract_certificate(mapped, hp, b, T)
        v_map = Du.dual_objective(cert, Du.gram(mapped), b, hp)
        v_kernel = Du.dual_objective(cert, Du.gram(d, "poly", 2, 0.0), b, hp)
        Q = ortho_group.rvs(mapped.p, random_state=seed)
        rotated = mapped.with_points(mapped.points @ Q)
        cert_rot = Du.extract_certificate(rotated, hp, b, T)
        v_rot = Du.dual_objective(cert_rot, Du.gram(rotated), b, hp)
        out.append((model.objective, cert.primal, v_map, v_kernel, v_rot))
    return out


def criterion_7(capsys=None):
    rows = kernel_suite()
    kern = max(abs(v_kernel - v_map) for _, _, v_map, v_kernel, _ in rows)
    prim = max(abs(v_map - primal) for _, primal, v_map, _, _ in rows)
    rot = max(abs(v_rot - v_map) for *_, v_map, _, v_rot in rows)
    ok = len(rows) >= 10 and kern <= 1e-6 and prim <= 1e-6 and rot <= 1e-9
    report(capsys, 7, "kernel consistency", ok,
           f"{len(rows)} poly2 instances: |kernel - feature map| {kern:.1e}, |dual - primal| {prim:.1e}, "
           f"rotation {rot:.1e}")


def criterion_8(capsys=None):
    suite = oracle_suite()[:N_HEUR]
    hits, infeasible = 0, 0
    for seed, d, hp, model, _, bf in suite:
        sol = math_heuristic(d, hp, seed=seed, T=model.T)
        try:
            check_binaries(d, sol.binaries, hp.m)
            x = assemble(model, sol.binaries, eval_phi(d, hp, sol.binaries, model.T))
            feasible = validate_solution(model, x).feasible(1e-6)
        except (InfeasibleBinariesError, RuntimeError):
            feasible = False
        infeasible += not feasible
        hits += feasible and abs(sol.objective - bf.objective) <= 1e-6 * max(1.0, abs(bf.objective))
    rate = hits / len(suite)
    ok = len(suite) == 50 and rate >= 0.9 and infeasible == 0
    report(capsys, 8, "heuristic quality", ok,
           f"matches exact optimum on {hits}/{len(suite)} ({100 * rate:.0f}%); infeasible returns {infeasible}")


def _cli(*args, cwd):
    res = subprocess.run([sys.executable, "-m", "hyparc.cli", *args], cwd=cwd, capture_output=True, text=True)
    if res.returncode != 0:
        raise RuntimeError(f"hyparc {' '.join(args)} failed: {res.stderr}")
    return res


def criterion_9(capsys=None):
    runs = [
        ["--m", "2", "--norm", "l2", "--heuristic", "on", "--seed", "5"],
        ["--m", "2", "--norm", "l1", "--loss", "ramp", "--c2", "3", "--heuristic", "on", "--seed", "1"],
        ["--m", "1", "--norm", "l1", "--heuristic", "off", "--seed", "0"],
    ]
    same = 0
    with tempfile.TemporaryDirectory() as tmp:
        _cli("generate", "--classes", "2", "--clouds", "4", "--n", "12", "--dim", "2", "--seed", "3",
             "--out", "d12.csv", cwd=tmp)
        _cli("generate", "--classes", "2", "--clouds", "2", "--n", "7", "--dim", "2", "--seed", "1",
             "--out", "d7.csv", cwd=tmp)
        first = open(os.path.join(tmp, "d12.csv"), "rb").read()
        _cli("generate", "--classes", "2", "--clouds", "4", "--n", "12", "--dim", "2", "--seed", "3",
             "--out", "again.csv", cwd=tmp)
        csv_same = first == open(os.path.join(tmp, "again.csv"), "rb").read()
        for q, args in enumerate(runs):
            data = "d7.csv" if "off" in args else "d12.csv"
            blobs = []
            for rep in range(2):
                out = f"m{q}_{rep}.json"
                _cli("train", "--data", data, "--model-out", out, *args, cwd=tmp)
                blobs.append(open(os.path.join(tmp, out), "rb").read())
            same += blobs[0] == blobs[1]
    ok = same == len(runs) and csv_same
    report(capsys, 9, "determinism", ok,
           f"{same}/{len(runs)} repeated CLI train runs byte-identical model JSON; generate CSV identical: {csv_same}")


# -------------------------------------------------------------------- tests
def test_criterion_1_oracle_equivalence(capsys):
    criterion_1(capsys)


def test_criterion_2_xor_separability(capsys):
    criterion_2(capsys)


def test_criterion_3_strong_duality(capsys):
    criterion_3(capsys)


def test_criterion_4_error_bounds(capsys):
    criterion_4(capsys)


def test_criterion_5_h_count(capsys):
    criterion_5(capsys)


def test_criterion_6_decision_rule(capsys):
    criterion_6(capsys)


def test_criterion_7_kernel_consistency(capsys):
    criterion_7(capsys)


def test_criterion_8_heuristic_quality(capsys):
    criterion_8(capsys)


def test_criterion_9_determinism(capsys):
    criterion_9(capsys)


if __name__ == "__main__":
    warnings.simplefilter("ignore")
    failures = 0
    for k in range(1, 10):
        try:
            globals()[f"criterion_{k}"]()
        except AssertionError:
            failures += 1
    print("\n".join(text for _, (_, text) in sorted(RESULTS.items())))
    sys.exit(1 if failures else 0)
