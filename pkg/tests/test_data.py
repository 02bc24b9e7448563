import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyparc.core import Hyperparameters, make_dataset
from hyparc.data import (C_GRID, generate_clouds, grid_search_cv, kfold_split, load_csv, parameter_grid,
                         proportion_test, read_table, save_csv)

statsmodels = pytest.importorskip("statsmodels.stats.proportion")


def test_proportion_test_against_statsmodels():
    res = proportion_test(94.0, 100, 60.0, 100)
    z, p = statsmodels.proportions_ztest([94, 60], [100, 100])
    assert res.z == pytest.approx(z, rel=1e-12)
    assert res.p_value == pytest.approx(p, rel=1e-9)
    assert res.z == pytest.approx(5.7128, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 99), st.integers(1, 99), st.integers(100, 400))
def test_proportion_test_property(a, b, n):
    res = proportion_test(a, 100, b, n)
    xa, xb = a, b / 100 * n
    z, p = statsmodels.proportions_ztest([xa, xb], [100, n])
    assert res.z == pytest.approx(z, rel=1e-9, abs=1e-12)
    assert res.p_value == pytest.approx(p, rel=1e-7, abs=1e-15)


def test_proportion_test_degenerate():
    res = proportion_test(100.0, 50, 100.0, 60)
    assert res.degenerate and res.z == 0.0 and res.p_value == 1.0
    with pytest.raises(ValueError):
        proportion_test(101.0, 10, 50.0, 10)


def test_generate_clouds_shape_and_seed():
    a = generate_clouds(3, 5, 60, 2, seed=4)
    b = generate_clouds(3, 5, 60, 2, seed=4)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)
    assert a.n == 60 and a.p == 2 and a.k == 3
    d, cid = generate_clouds(2, 4, 40, 3, seed=1, return_clouds=True)
    assert set(cid.tolist()) == {0, 1, 2, 3} and d.p == 3
    # every cloud carries a single class
    for c in range(4):
        assert len(set(d.labels[cid == c].tolist())) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5))
def test_kfold_is_stratified_partition(seed, folds):
    rng = np.random.default_rng(seed)
    y = rng.integers(1, 4, 40)
    splits = kfold_split(y, folds, seed)
    tests = np.sort(np.concatenate([te for _, te in splits]))
    assert np.array_equal(tests, np.arange(40))
    for tr, te in splits:
        assert not set(tr) & set(te)
        for s in np.unique(y):
            share = np.sum(y[te] == s)
            assert abs(share - np.sum(y == s) / folds) <= 1


def test_parameter_grid():
    hinge = parameter_grid(3)
    assert len(hinge) == 2 * len(C_GRID) and all(h.C1 == h.C2 for h in hinge)
    ramp = parameter_grid(2, m_grid=[2], loss="ramp")
    assert len(ramp) == 10 and all(h.C1 < h.C2 for h in ramp)


def test_csv_round_trip(tmp_path):
    d = generate_clouds(2, 2, 10, 2, seed=0)
    path = tmp_path / "d.csv"
    save_csv(d, path)
    X, y, names = read_table(path)
    assert X == pytest.approx(d.points * d.scales + d.means)
    again = load_csv(path, normalize=False)
    # labels are re-encoded by first appearance; the names per row must survive
    names = np.array(again.label_names)[again.labels - 1]
    assert names.tolist() == np.array(d.label_names)[d.labels - 1].tolist()
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,label\n1,2,x\n3\n")
    with pytest.raises(ValueError):
        read_table(bad)


def test_grid_search_runs_and_is_deterministic():
    d = generate_clouds(2, 2, 16, 2, seed=2)
    kw = dict(m_grid=[1, 2], c_grid=[1.0], outer_folds=2, inner_folds=2, norm="l1", seed=0)
    a = grid_search_cv(d, **kw)
    b = grid_search_cv(d, **kw)
    assert a.best == b.best and a.outer_acc == b.outer_acc
    assert a.best.m == 1  # ties go to the smaller arrangement on separable clouds
    assert 0.0 <= a.mean_acc <= 100.0
