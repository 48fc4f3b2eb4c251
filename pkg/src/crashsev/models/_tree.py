"""Greedy binary tree growing shared by every tree-based model.

Two modes:

* classification (``criterion`` gini or entropy): weighted impurity decrease,
  leaves hold the weighted fraction of class 1;
* second-order (``grad``/``hess`` given): gain
  ``0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam))``, a split is made only
  when the gain exceeds ``split_gamma``; leaves hold ``-G / (H + lam)``.

Candidate thresholds are midpoints between consecutive distinct values of a
feature inside the node; rows with ``x <= threshold`` go left.  Ties are broken
by lowest feature index, then lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError

LEAF = -1
_EPS = 1e-12


@dataclass
class Tree:
    """Array-backed binary tree; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def scaled(self, factor: float) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right, self.value * factor, self.n_samples)

    def with_values(self, value) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right, np.asarray(value, float), self.n_samples)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "n_samples": self.n_samples.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], np.int64), np.asarray(d["threshold"], float),
                   np.asarray(d["left"], np.int64), np.asarray(d["right"], np.int64),
                   np.asarray(d["value"], float), np.asarray(d["n_samples"], np.int64))

    @classmethod
    def leaf(cls, value: float, n: int = 0) -> "Tree":
        return cls(np.array([LEAF]), np.array([0.0]), np.array([LEAF]), np.array([LEAF]),
                   np.array([float(value)]), np.array([n]))


def _impurity(p, criterion):
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1.0 - p) * np.log2(1.0 - p))
    return np.nan_to_num(h, nan=0.0)


class _Grower:
    def __init__(self, X, stats, mode, criterion, max_depth, min_samples_leaf, max_features,
                 split_gamma, reg_lambda, rng):
        self.X = X
        self.mode = mode
        self.criterion = criterion
        self.max_depth = np.inf if max_depth is None else max_depth
        self.min_leaf = max(1, int(min_samples_leaf))
        self.max_features = max_features
        self.split_gamma = split_gamma
        self.lam = reg_lambda
        self.rng = rng
        self.a, self.b = stats  # (w*y, w) or (grad, hess)
        self.nodes = []

    def leaf_value(self, idx):
        A, B = self.a[idx].sum(), self.b[idx].sum()
        if self.mode == "newton":
            return -A / (B + self.lam)
        return A / B if B > 0 else 0.0

    def candidate_features(self):
        p = self.X.shape[1]
        if self.max_features is None or self.max_features >= p:
            return np.arange(p)
        return np.sort(self.rng.choice(p, size=self.max_features, replace=False))

    def best_split(self, idx):
        m = len(idx)
        if m < 2 * self.min_leaf:
            return None
        feats = self.candidate_features()
        Xn = self.X[np.ix_(idx, feats)]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        ca = np.cumsum(self.a[idx][order], axis=0)[:-1]
        cb = np.cumsum(self.b[idx][order], axis=0)[:-1]
        A, B = self.a[idx].sum(), self.b[idx].sum()
        aR, bR = A - ca, B - cb

        if self.mode == "newton":
            lam = self.lam
            gain = 0.5 * (ca ** 2 / (cb + lam) + aR ** 2 / (bR + lam) - A ** 2 / (B + lam))
            floor = max(self.split_gamma, _EPS)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                pl = np.where(cb > 0, ca / cb, 0.0)
                pr = np.where(bR > 0, aR / bR, 0.0)
            parent = _impurity(np.array(A / B), self.criterion)
            gain = B * parent - cb * _impurity(pl, self.criterion) - bR * _impurity(pr, self.criterion)
            floor = _EPS * max(B, 1.0)

        pos = np.arange(1, m)[:, None]  # rows on the left
        valid = (xs[:-1] < xs[1:]) & (pos >= self.min_leaf) & (m - pos >= self.min_leaf)
        gain = np.where(valid, gain, -np.inf)
        flat = gain.T.ravel()  # feature-major: lowest feature, then lowest threshold
        k = int(np.argmax(flat))
        if not flat[k] > floor:
            return None
        f_local, row = divmod(k, m - 1)
        lo, hi = xs[row, f_local], xs[row + 1, f_local]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return int(feats[f_local]), float(thr)

    def grow(self, idx):
        # depth-first, children are allocated right after their parent is split
        self.nodes.append(None)
        stack = [(0, idx, 0)]
        while stack:
            node_id, rows, depth = stack.pop()
            value = self.leaf_value(rows)
            split = None
            pure = self.mode != "newton" and (value <= 0.0 or value >= 1.0)
            if depth < self.max_depth and not pure:
                split = self.best_split(rows)
            if split is None:
                self.nodes[node_id] = (LEAF, 0.0, LEAF, LEAF, value, len(rows))
                continue
            f, thr = split
            go_left = self.X[rows, f] <= thr
            left_id, right_id = len(self.nodes), len(self.nodes) + 1
            self.nodes.extend([None, None])
            self.nodes[node_id] = (f, thr, left_id, right_id, value, len(rows))
            stack.append((right_id, rows[~go_left], depth + 1))
            stack.append((left_id, rows[go_left], depth + 1))
        cols = list(zip(*self.nodes))
        return Tree(np.asarray(cols[0], np.int64), np.asarray(cols[1], float), np.asarray(cols[2], np.int64),
                    np.asarray(cols[3], np.int64), np.asarray(cols[4], float), np.asarray(cols[5], np.int64))


def grow_tree(X, y=None, *, grad=None, hess=None, sample_weight=None, criterion="gini", max_depth=None,
              min_samples_leaf=1, max_features=None, split_gamma=0.0, reg_lambda=1.0,
              random_state=None) -> Tree:
    """Grow one tree; see the module docstring for the two modes.

    Parameters
    ----------
    X : ndarray of shape (n, p)
    y : ndarray of 0/1, classification mode
    grad, hess : ndarrays, second-order mode (``y`` ignored)
    sample_weight : ndarray, optional
        Row weights for classification mode.
    max_features : int, optional
        Number of features drawn without replacement at each split.
    random_state : int, Generator or None
        Drives feature subsampling only.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot grow a tree on empty input")
    n = X.shape[0]
    if grad is not None:
        mode = "newton"
        stats = (np.asarray(grad, float), np.asarray(hess, float))
    else:
        if criterion not in ("gini", "entropy"):
            raise ValueError(f"unknown criterion {criterion!r}")
        y = np.asarray(y, dtype=float)
        if not np.isin(y, (0.0, 1.0)).all():
            raise DataError("classification labels must be 0/1")
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, float)
        mode = "classification"
        stats = (w * y, w)
    rng = random_state if isinstance(random_state, np.random.Generator) else np.random.default_rng(random_state)
    grower = _Grower(X, stats, mode, criterion, max_depth, min_samples_leaf, max_features,
                     split_gamma, reg_lambda, rng)
    return grower.grow(np.arange(n))
