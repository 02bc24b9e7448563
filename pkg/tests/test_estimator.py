import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hyparc.estimator import ArrangementClassifier


def test_fit_predict_with_string_labels():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal((0, 0), 0.4, (5, 2)), rng.normal((4, 4), 0.4, (5, 2))])
    y = np.array(["cat"] * 5 + ["dog"] * 5)
    clf = ArrangementClassifier(m=1, norm="l1", heuristic="on").fit(X, y)
    assert list(clf.classes_) == ["cat", "dog"]
    assert clf.score(X, y) == 1.0
    assert clf.predict(X[:2]).tolist() == ["cat", "cat"]
    assert clf.hyperplanes_[0].shape == (1, 2)


def test_clone_and_params():
    clf = ArrangementClassifier(m=3, C1=0.5)
    twin = clone(clf)
    assert twin.get_params()["m"] == 3 and twin.get_params()["C1"] == 0.5


def test_errors():
    with pytest.raises(NotFittedError):
        ArrangementClassifier().predict(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        ArrangementClassifier(m=1.5).fit(np.zeros((4, 2)) + np.arange(4)[:, None], [0, 1, 0, 1])
    clf = ArrangementClassifier(m=1, heuristic="off").fit(np.array([[0.0, 0], [0, 1], [2, 0], [2, 1]]), [0, 0, 1, 1])
    with pytest.raises(ValueError):
        clf.predict(np.zeros((1, 3)))
