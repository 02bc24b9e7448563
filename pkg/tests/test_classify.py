import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyparc.classify import (accuracy, binaries_of, build_rule, empty_cell_costs, load_model, model_from_json,
                             model_to_json, predict, predict_batch, predict_lp, save_model, train)
from hyparc.core import (Arrangement, DegenerateModelError, Hyperparameters, loss_terms, make_dataset,
                         sign_patterns)
from hyparc.formulation import build_model
from hyparc.solver import Solution, branch_and_bound, eval_phi

from conftest import random_instance, random_trained_model


def enumerate_rule(model, x):
    """Closest representative by explicit enumeration; ties to lowest class, then index."""
    vals = model.arrangement.values(np.atleast_2d(x))[0]
    s = np.where(vals >= 0, 1, -1)
    if tuple(s) in model.cell_table:
        return model.cell_table[tuple(s)]
    best = None
    for idx, (pattern, cls, _) in enumerate(model.representatives):
        cost = sum(abs(vals[r]) for r in range(len(s)) if s[r] != pattern[r])
        key = (round(cost, 12), cls, idx)
        if best is None or key < best:
            best = key
    return best[1]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_prediction_matches_enumeration_and_lp(seed):
    model = random_trained_model(seed)
    X = np.random.default_rng(seed + 1).normal(size=(10, 2)) * 3
    batch = predict_batch(model, X)
    for x, got in zip(X, batch):
        assert got == enumerate_rule(model, x)
        assert got == predict_lp(model, x)
        assert got == predict(model, x)


def test_empty_cell_costs_shape():
    model = random_trained_model(0)
    C = empty_cell_costs(model, np.zeros((4, 2)))
    assert C.shape == (4, len(model.representatives)) and np.all(C >= 0)


def test_train_exact_separable(tiny):
    model = train(tiny, Hyperparameters(m=1, C1=1.0, norm="l2"), heuristic="off")
    assert accuracy(predict_batch(model, tiny.points, normalized=True), tiny.labels) == 100.0
    assert model.objective == pytest.approx(0.5, abs=1e-6)
    assert model.extra["heuristic"] is False


def test_train_xor_needs_two_lines(xor4):
    two = train(xor4, Hyperparameters(m=2, C1=1.0, norm="l1"), heuristic="off")
    assert accuracy(predict_batch(two, xor4.points), xor4.labels) == 100.0
    # one line: the optimum is the null hyperplane, every point sits on it
    one = train(xor4, Hyperparameters(m=1, C1=1.0, norm="l1"), heuristic="off")
    assert one.arrangement.omega == pytest.approx(np.zeros((1, 2)), abs=1e-9)
    assert one.objective == pytest.approx(4.0, abs=1e-6)
    assert accuracy(predict_batch(one, xor4.points), xor4.labels) == 50.0


def test_train_rejects_too_few_hyperplanes():
    d, _ = random_instance(1, k_range=(3, 4))
    with pytest.raises(ValueError):
        train(d, Hyperparameters(m=1))


def test_rule_uses_only_well_classified(tiny):
    hp = Hyperparameters(m=1, norm="l1")
    sol = branch_and_bound(build_model(tiny, hp))
    model = build_rule(sol, tiny, hp)
    J = np.flatnonzero(sol.binaries.xi == 0)
    assert len(model.representatives) == len(J)
    empty = Solution(None, None, None, None, None, np.inf, np.inf, "infeasible")
    with pytest.raises(DegenerateModelError):
        build_rule(empty, tiny, hp)


def test_json_round_trip_and_files(tmp_path, tiny):
    model = train(tiny, Hyperparameters(m=2, C1=1.0, norm="l2"), heuristic="off")
    text = model_to_json(model)
    again = model_from_json(text)
    assert model_to_json(again) == text
    path = tmp_path / "m.json"
    save_model(model, path)
    assert model_to_json(load_model(path)) == text
    with pytest.raises(ValueError):
        model_from_json(json.dumps({"schema": "other"}))
    b = binaries_of(again, tiny)
    assert eval_phi(tiny, model.hyperparams, b, model.extra["T"]).value == pytest.approx(model.objective, abs=1e-6)


def test_loss_terms_match_solver_errors():
    d, hp = random_instance(11, norm="l2")
    model = train(d, hp, heuristic="off")
    b = binaries_of(model, d)
    phi = eval_phi(d, hp, b, model.extra["T"])
    e, dd = loss_terms(model, d)
    # the optimizer may pick any representative; the first-principles losses cannot exceed its choice
    assert (hp.C1 * e.sum() + hp.C2 * dd.sum()) <= hp.C1 * phi.e.sum() + hp.C2 * phi.d.sum() + 1e-6


def test_raw_features_are_normalized_by_the_model():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal((0, 0), 0.3, (4, 2)), rng.normal((10, 50), 0.3, (4, 2))])
    d = make_dataset(X, [1] * 4 + [2] * 4)
    model = train(d, Hyperparameters(m=1, norm="l2"), heuristic="on")
    assert accuracy(predict_batch(model, X), d.labels) == 100.0
    assert np.array_equal(predict_batch(model, d.points, normalized=True), predict_batch(model, X))
