"""Shared input handling for the binary classifiers."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import ConfigError, DataError
from ..schema import DesignMatrix


def _names_of(X):
    if isinstance(X, DesignMatrix):
        return list(X.column_names)
    if hasattr(X, "columns"):
        return [str(c) for c in X.columns]
    return None


class BinaryClassifier(ClassifierMixin, BaseEstimator):
    """Base for the 0/1 classifiers.

    Accepts a :class:`DesignMatrix` (labels taken from it), a DataFrame or a
    plain array.  Column names seen at fit time are checked on every later
    call.  Subclasses implement ``_fit(X, y)`` and ``_proba(X)`` returning the
    probability of class 1.
    """

    kind = None
    _fit_state = ()

    def fit(self, X, y=None):
        names = _names_of(X)
        if isinstance(X, DesignMatrix):
            X, y = X.values, X.labels if y is None else y
        if y is None:
            raise DataError("labels are required")
        X, y = check_X_y(X, y, dtype=np.float64)
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0/1")
        if len(np.unique(y)) < 2:
            raise DataError("both classes must be present to fit")
        self._validate_params()
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.feature_names_in_ = np.asarray(names if names is not None else
                                            [f"x{j}" for j in range(X.shape[1])], dtype=object)
        self._fit(X, y.astype(np.int64))
        return self

    def _check_X(self, X):
        check_is_fitted(self, "classes_")
        names = _names_of(X)
        if isinstance(X, DesignMatrix):
            X = X.values
        if names is not None and list(names) != list(self.feature_names_in_):
            missing = [n for n in self.feature_names_in_ if n not in names]
            extra = [n for n in names if n not in set(self.feature_names_in_)]
            raise DataError(f"column mismatch: missing {missing}, unexpected {extra}"
                            + ("" if missing or extra else " (order differs)"))
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X

    def predict_proba(self, X):
        p = np.clip(self._proba(self._check_X(X)), 0.0, 1.0)
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold=0.5):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {threshold}")
        return (self.predict_proba(X)[:, 1] >= threshold).astype(np.int64)

    def _validate_params(self):
        pass

    @staticmethod
    def _require(cond, key, reason):
        if not cond:
            raise ConfigError(f"invalid hyperparameter {key!r}: {reason}")

    # serialization hooks
    def _get_state(self) -> dict:
        raise NotImplementedError

    def _set_state(self, state: dict) -> None:
        raise NotImplementedError


class TreeEnsembleMixin:
    """Tree-based models expose ``output = offset + sum_t weight_t * tree_t(x)``."""

    def additive_trees(self):
        """Return ``(trees, weights, offset)`` describing :meth:`explained_output`."""
        raise NotImplementedError

    def explained_output(self, X):
        X = self._check_X(X)
        trees, weights, offset = self.additive_trees()
        out = np.full(len(X), float(offset))
        for tree, w in zip(trees, weights):
            out += w * tree.predict(X)
        return out
