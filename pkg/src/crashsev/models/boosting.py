"""AdaBoost (SAMME.R) on stumps and second-order gradient boosting on logistic loss."""
import numpy as np
from scipy.special import expit, log_expit

from ..exceptions import ModelingError
from ._tree import Tree, grow_tree
from .base import BinaryClassifier, TreeEnsembleMixin

PROBA_CLIP = 1e-12


def log_loss(y, margin):
    return float(-np.mean(y * log_expit(margin) + (1 - y) * log_expit(-margin)))


class AdaBoostModel(TreeEnsembleMixin, BinaryClassifier):
    """Real AdaBoost (SAMME.R) with depth-1 probability stumps.

    Round ``k`` fits a gini stump to the weighted data; its clipped leaf
    probability ``p`` contributes ``learning_rate * 0.5 * log(p / (1 - p))`` to
    the margin ``F``.  Sample weights are multiplied by
    ``exp(-learning_rate * s_i * 0.5 * log(p / (1 - p)))`` with ``s_i = +-1`` and
    renormalized to sum 1.  Boosting stops early when a stump's weighted error
    reaches 0.5 (that stump is discarded) or hits 0 (that stump is kept).
    ``P(y=1) = sigmoid(2 F)``.

    Parameters
    ----------
    algorithm : {'SAMME.R'}, default='SAMME.R'
    learning_rate : float, default=1.0
    n_estimators : int, default=50
    random_state : int, default=0
    """

    kind = "adaboost"

    def __init__(self, algorithm="SAMME.R", learning_rate=1.0, n_estimators=50, random_state=0):
        self.algorithm = algorithm
        self.learning_rate = learning_rate
        self.n_estimators = n_estimators
        self.random_state = random_state

    def _validate_params(self):
        self._require(self.algorithm == "SAMME.R", "algorithm", "only 'SAMME.R' is supported")
        self._require(self.learning_rate > 0, "learning_rate", "must be > 0")
        self._require(int(self.n_estimators) >= 1, "n_estimators", "must be >= 1")

    def _fit(self, X, y):
        n = len(y)
        sign = np.where(y == 1, 1.0, -1.0)
        w = np.full(n, 1.0 / n)
        self.estimators_, self.estimator_errors_, self.weight_sums_ = [], [], []
        for _ in range(int(self.n_estimators)):
            stump = grow_tree(X, y, sample_weight=w, criterion="gini", max_depth=1)
            p = np.clip(stump.value, PROBA_CLIP, 1.0 - PROBA_CLIP)
            half_logit = 0.5 * (np.log(p) - np.log1p(-p))
            leaf = stump.apply(X)
            pred = (stump.value[leaf] > 0.5).astype(np.int64)
            error = float(w[pred != y].sum())
            if error >= 0.5:
                break
            self.estimators_.append(stump.with_values(self.learning_rate * half_logit))
            self.estimator_errors_.append(error)
            if error <= 0.0:
                break
            w = w * np.exp(-self.learning_rate * sign * half_logit[leaf])
            w /= w.sum()
            self.weight_sums_.append(float(w.sum()))
        if not self.estimators_:
            raise ModelingError("adaboost: first stump is no better than chance")

    def decision_function(self, X):
        return self.explained_output(X)

    def _margin(self, X):
        return np.sum([t.predict(X) for t in self.estimators_], axis=0)

    def _proba(self, X):
        return expit(2.0 * self._margin(X))

    def additive_trees(self):
        return list(self.estimators_), [1.0] * len(self.estimators_), 0.0

    def _get_state(self):
        return {"trees": [t.to_dict() for t in self.estimators_]}

    def _set_state(self, state):
        self.estimators_ = [Tree.from_dict(d) for d in state["trees"]]


class GradientBoostingModel(TreeEnsembleMixin, BinaryClassifier):
    """Newton boosting of regression trees on the logistic loss.

    Starts from the training log-odds; each round grows a tree on the loss
    gradients ``p - y`` and Hessians ``p (1 - p)``, with leaf values
    ``-G / (H + reg_lambda)`` scaled by ``learning_rate``.  ``gamma`` is the
    minimum loss reduction needed to make a split.

    Parameters
    ----------
    gamma : float, default=0.0
    learning_rate : float, default=0.3
    max_depth : int, default=6
    n_estimators : int, default=100
    reg_lambda : float, default=1.0
    min_samples_leaf : int, default=1
    random_state : int, default=0
    """

    kind = "gbt"

    def __init__(self, gamma=0.0, learning_rate=0.3, max_depth=6, n_estimators=100, reg_lambda=1.0,
                 min_samples_leaf=1, random_state=0):
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.n_estimators = n_estimators
        self.reg_lambda = reg_lambda
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def _validate_params(self):
        self._require(self.gamma >= 0, "gamma", "must be >= 0")
        self._require(self.learning_rate > 0, "learning_rate", "must be > 0")
        self._require(int(self.max_depth) >= 1, "max_depth", "must be >= 1")
        self._require(int(self.n_estimators) >= 1, "n_estimators", "must be >= 1")
        self._require(self.reg_lambda >= 0, "reg_lambda", "must be >= 0")

    def _fit(self, X, y):
        prior = y.mean()
        self.base_margin_ = float(np.log(prior / (1.0 - prior)))
        margin = np.full(len(y), self.base_margin_)
        self.estimators_ = []
        self.train_loss_ = [log_loss(y, margin)]
        for _ in range(int(self.n_estimators)):
            p = expit(margin)
            tree = grow_tree(X, grad=p - y, hess=p * (1.0 - p), max_depth=int(self.max_depth),
                             min_samples_leaf=self.min_samples_leaf, split_gamma=self.gamma,
                             reg_lambda=self.reg_lambda).scaled(self.learning_rate)
            self.estimators_.append(tree)
            margin = margin + tree.predict(X)
            self.train_loss_.append(log_loss(y, margin))

    def decision_function(self, X):
        return self.explained_output(X)

    def _proba(self, X):
        margin = np.full(len(X), self.base_margin_)
        for tree in self.estimators_:
            margin += tree.predict(X)
        return expit(margin)

    def additive_trees(self):
        return list(self.estimators_), [1.0] * len(self.estimators_), self.base_margin_

    def _get_state(self):
        return {"base_margin": self.base_margin_, "trees": [t.to_dict() for t in self.estimators_]}

    def _set_state(self, state):
        self.base_margin_ = float(state["base_margin"])
        self.estimators_ = [Tree.from_dict(d) for d in state["trees"]]
