"""scikit-learn compatible wrapper around :func:`hyparc.classify.train`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .classify import predict_batch, train
from .core import Hyperparameters, make_dataset
from .solver import SolveOptions


class ArrangementClassifier(ClassifierMixin, BaseEstimator):
    """Multiclass classifier built from a maximum-margin arrangement of hyperplanes.

    Parameters
    ----------
    m : number of hyperplanes.
    C1, C2 : in-margin and out-margin (or misclassification) costs; ``C2=None``
        means ``m * C1``.
    norm : ``"l1"`` or ``"l2"`` margin.
    loss : ``"hinge"`` or ``"ramp"``.
    heuristic : ``"auto"``, ``"on"`` or ``"off"``.
    tau, theta : clustering and z-fixing thresholds of the math-heuristic.
    time_limit : seconds for the exact solver.
    normalize : z-score the features before fitting.
    seed : seed for every random choice.
    """

    def __init__(self, m=2, C1=1.0, C2=None, norm="l2", loss="hinge", heuristic="auto", tau=None,
                 theta=None, time_limit=300.0, normalize=True, seed=0):
        self.m = m
        self.C1 = C1
        self.C2 = C2
        self.norm = norm
        self.loss = loss
        self.heuristic = heuristic
        self.tau = tau
        self.theta = theta
        self.time_limit = time_limit
        self.normalize = normalize
        self.seed = seed

    def _hyperparameters(self) -> Hyperparameters:
        if not isinstance(self.m, (int, np.integer)) or isinstance(self.m, bool):
            raise ValueError(f"m must be an integer, got {self.m!r}")
        if self.heuristic not in ("auto", "on", "off"):
            raise ValueError("heuristic must be 'auto', 'on' or 'off'")
        return Hyperparameters(m=self.m, C1=self.C1, C2=self.C2, norm=self.norm, loss=self.loss)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        params = self._hyperparameters()
        data = make_dataset(X, y, normalize=self.normalize)
        if data.k < 2:
            raise ValueError("need at least two classes")
        options = SolveOptions(time_limit=float(self.time_limit), seed=self.seed)
        self.model_ = train(data, params, heuristic=self.heuristic, tau=self.tau, theta=self.theta,
                            options=options, seed=self.seed)
        self.classes_ = np.asarray(data.label_names)
        self.n_features_in_ = X.shape[1]
        self.objective_ = self.model_.objective
        self.hyperplanes_ = (self.model_.arrangement.omega, self.model_.arrangement.omega0)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.classes_[predict_batch(self.model_, X) - 1]
