"""Decision tree and random forest classifiers."""
import math

import numpy as np

from ._tree import Tree, grow_tree
from .base import BinaryClassifier, TreeEnsembleMixin


def _check_tree_params(model):
    model._require(model.criterion in ("gini", "entropy"), "criterion", "expected 'gini' or 'entropy'")
    model._require(model.max_depth is None or int(model.max_depth) >= 1, "max_depth", "must be >= 1")
    model._require(int(model.min_samples_leaf) >= 1, "min_samples_leaf", "must be >= 1")


class DecisionTreeModel(TreeEnsembleMixin, BinaryClassifier):
    """CART classification tree; leaves predict the class-1 frequency.

    Parameters
    ----------
    criterion : {'gini', 'entropy'}, default='gini'
    max_depth : int or None, default=None
    min_samples_leaf : int, default=1
    random_state : int, default=0
        Unused by the greedy search, kept for a uniform constructor.
    """

    kind = "tree"

    def __init__(self, criterion="gini", max_depth=None, min_samples_leaf=1, random_state=0):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def _validate_params(self):
        _check_tree_params(self)

    def _fit(self, X, y):
        self.tree_ = grow_tree(X, y, criterion=self.criterion, max_depth=self.max_depth,
                               min_samples_leaf=self.min_samples_leaf, random_state=self.random_state)

    def _proba(self, X):
        return self.tree_.predict(X)

    def additive_trees(self):
        return [self.tree_], [1.0], 0.0

    def _get_state(self):
        return {"tree": self.tree_.to_dict()}

    def _set_state(self, state):
        self.tree_ = Tree.from_dict(state["tree"])


def resolve_max_features(max_features, p):
    if max_features is None:
        return p
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(p))))
    if max_features == "log2":
        return max(1, int(math.floor(math.log2(p))))
    if isinstance(max_features, float):
        return max(1, int(max_features * p))
    return min(int(max_features), p)


class RandomForestModel(TreeEnsembleMixin, BinaryClassifier):
    """Bagged CART trees with per-split feature subsampling.

    Tree ``t`` draws its bootstrap sample and its feature subsets from a
    generator seeded by ``(random_state, t)``, so the forest does not depend on
    the order trees are built in.  The probability is the mean of the trees'
    leaf class frequencies.

    Parameters
    ----------
    criterion : {'gini', 'entropy'}, default='gini'
    max_depth : int or None, default=None
    max_features : {'sqrt', 'log2'}, int, float or None, default='sqrt'
        ``'sqrt'`` is ``floor(sqrt(p))``.
    n_estimators : int, default=100
    min_samples_leaf : int, default=1
    bootstrap : bool, default=True
    random_state : int, default=0
    """

    kind = "forest"

    def __init__(self, criterion="gini", max_depth=None, max_features="sqrt", n_estimators=100,
                 min_samples_leaf=1, bootstrap=True, random_state=0):
        self.criterion = criterion
        self.max_depth = max_depth
        self.max_features = max_features
        self.n_estimators = n_estimators
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _validate_params(self):
        _check_tree_params(self)
        self._require(int(self.n_estimators) >= 1, "n_estimators", "must be >= 1")
        ok = self.max_features in (None, "sqrt", "log2") or (
            isinstance(self.max_features, (int, float)) and not isinstance(self.max_features, bool)
            and self.max_features > 0)
        self._require(ok, "max_features", "expected 'sqrt', 'log2', None or a positive number")

    def _fit(self, X, y):
        n, p = X.shape
        k = resolve_max_features(self.max_features, p)
        self.estimators_ = []
        for t in range(int(self.n_estimators)):
            rng = np.random.default_rng([int(self.random_state), t])
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            yb = y[rows]
            if yb.min() == yb.max():
                self.estimators_.append(Tree.leaf(float(yb[0]), n))
                continue
            self.estimators_.append(grow_tree(X[rows], yb, criterion=self.criterion, max_depth=self.max_depth,
                                              min_samples_leaf=self.min_samples_leaf, max_features=k,
                                              random_state=rng))

    def _proba(self, X):
        return np.mean([tree.predict(X) for tree in self.estimators_], axis=0)

    def additive_trees(self):
        T = len(self.estimators_)
        return list(self.estimators_), [1.0 / T] * T, 0.0

    def _get_state(self):
        return {"trees": [t.to_dict() for t in self.estimators_]}

    def _set_state(self, state):
        self.estimators_ = [Tree.from_dict(d) for d in state["trees"]]
