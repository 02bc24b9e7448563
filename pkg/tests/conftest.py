import warnings

import numpy as np
import pytest

from hyparc.core import Hyperparameters, make_dataset


def random_labels(rng, n, k):
    while True:
        y = rng.integers(1, k + 1, n)
        if len(set(y.tolist())) == k:
            return y


def random_instance(seed, n_range=(4, 7), k_range=(2, 4), m_range=(1, 3), norm="l1", loss="hinge"):
    """Small seeded classification instance inside the brute-force guard.

    n = 6 with m = 2 is shrunk to n = 5 to keep branch-and-bound fast.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(*n_range))
    k = int(rng.integers(*k_range))
    m = int(rng.integers(*m_range))
    if 2 ** m < k:
        m = 2
    if n == 6 and m == 2:
        n = 5
    y = random_labels(rng, n, k)
    X = rng.normal(size=(n, 2))
    C2 = None if loss == "hinge" else 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hp = Hyperparameters(m=m, C1=1.0, C2=C2, norm=norm, loss=loss)
    return make_dataset(X, y, normalize=False), hp


@pytest.fixture
def tiny():
    """Four points, two classes, separable by one line."""
    X = np.array([[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]])
    return make_dataset(X, [1, 1, 2, 2], normalize=False)


@pytest.fixture
def xor4():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    return make_dataset(X, [1, 1, 2, 2], normalize=False)


def random_trained_model(seed, m=3, p=2, n_reps=6, k=3):
    """A TrainedModel with random hyperplanes and representatives, for decision-rule tests."""
    from hyparc.core import Arrangement, TrainedModel, sign_patterns

    rng = np.random.default_rng(seed)
    arr = Arrangement.from_arrays(rng.normal(size=(m, p)), rng.normal(size=m))
    pts = rng.normal(size=(n_reps, p)) * 2
    S = sign_patterns(arr, pts)
    table, reps = {}, []
    for x, row in zip(pts, S):
        pattern = tuple(int(v) for v in row)
        cls = table.setdefault(pattern, int(rng.integers(1, k + 1)))
        reps.append((pattern, cls, tuple(x)))
    return TrainedModel(arr, table, tuple(reps), Hyperparameters(m=m), 0.0)
