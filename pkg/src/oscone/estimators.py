"""scikit-learn style wrappers around the membership and norm queries.

Samples are :class:`TensorElement` objects (any sequence of them works as
``X``). Nothing is learned; ``fit`` only validates parameters and records the
label set so the wrappers compose with sklearn pipelines and model selection.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .membership import DEFAULT_EPS, DEFAULT_TOL, max_cone_membership_level, min_cone_membership, osy_max_norm
from .tensor import TensorElement
from .verdict import Verdict

LABELS = np.array([v.value for v in Verdict])


def _elements(X) -> list[TensorElement]:
    items = list(X)
    for i, u in enumerate(items):
        if not isinstance(u, TensorElement):
            raise TypeError(f"sample {i} is {type(u).__name__}, expected TensorElement")
    return items


class MembershipClassifier(ClassifierMixin, BaseEstimator):
    """Label elements ``Member`` / ``NonMember`` / ``Unknown`` for one cone."""

    def __init__(self, cone="max", eps=DEFAULT_EPS, k_max=None, tol=DEFAULT_TOL, seed=0):
        self.cone = cone
        self.eps = eps
        self.k_max = k_max
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        if self.cone not in ("min", "max"):
            raise ValueError(f"cone must be 'min' or 'max', got {self.cone!r}")
        if not (self.eps > 0 and self.tol > 0):
            raise ValueError("eps and tol must be positive")
        _elements(X)
        self.classes_ = LABELS.copy()
        return self

    def predict_verdicts(self, X) -> list:
        if self.cone == "min":
            return [min_cone_membership(u, tol=self.tol) for u in _elements(X)]
        return [
            max_cone_membership_level(u, eps=self.eps, k_max=self.k_max, tol=self.tol, seed=self.seed)
            for u in _elements(X)
        ]

    def predict(self, X) -> np.ndarray:
        return np.array([v.status.value for v in self.predict_verdicts(X)])

    def decision_function(self, X) -> np.ndarray:
        # Smallest eigenvalue of the shifted realization; positive inside the min cone.
        return np.array([np.linalg.eigvalsh(u.realize())[0] + self.eps for u in _elements(X)])


class OsyNormTransformer(TransformerMixin, BaseEstimator):
    """Map each element to its ``[lo, hi]`` maximal-norm bracket."""

    def __init__(self, tol=1e-4, k_max=None, seed=0):
        self.tol = tol
        self.k_max = k_max
        self.seed = seed

    def fit(self, X, y=None):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        _elements(X)
        self.n_features_out_ = 2
        return self

    def transform(self, X) -> np.ndarray:
        out = [tuple(osy_max_norm(u, tol=self.tol, k_max=self.k_max, seed=self.seed)) for u in _elements(X)]
        return np.array(out, dtype=float).reshape(-1, 2)

    def get_feature_names_out(self, input_features=None):
        return np.array(["lo", "hi"], dtype=object)
