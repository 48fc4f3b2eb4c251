"""Interventional Shapley values: exact enumeration and a tree-path algorithm.

Both compute the same game: for a row ``x`` and a background set ``Z``,
``v(S) = mean_z f(x_S, z_rest)``.  Tree-based models are explained on the
quantity their trees add up to (``explained_output``): the class-1
probability for a tree or forest, the pre-sigmoid margin for the boosted
ensembles.  Other models are explained on their class-1 probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import DataError
from .models.base import TreeEnsembleMixin
from .schema import DesignMatrix

MAX_BRUTE_FORCE_FEATURES = 20


def _values(X):
    return X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)


def model_output(model, X) -> np.ndarray:
    """The scalar output attributions are computed for."""
    if isinstance(model, TreeEnsembleMixin):
        return model.explained_output(X)
    if callable(model) and not hasattr(model, "predict_proba"):
        return np.asarray(model(_values(X)), dtype=float)
    return model.predict_proba(X)[:, 1]


def output_kind(model) -> str:
    if isinstance(model, TreeEnsembleMixin) and model.kind in ("adaboost", "gbt"):
        return "margin"
    return "probability"


@dataclass
class ShapMatrix:
    """Per-row attributions; ``base_value + values[i].sum()`` equals ``scores[i]``."""

    values: np.ndarray
    base_value: float
    column_names: list
    scores: np.ndarray
    output: str = "probability"

    def local_accuracy_error(self) -> float:
        return float(np.max(np.abs(self.base_value + self.values.sum(axis=1) - self.scores)))


@dataclass
class GlobalImportance:
    ranking: list  # (feature, mean |shap|), non-increasing

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"feature": [f for f, _ in self.ranking],
                             "mean_abs_shap": [v for _, v in self.ranking],
                             "rank": np.arange(1, len(self.ranking) + 1)})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _shapley_weights(p):
    return np.array([math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)])


def _popcount(a):
    a = np.asarray(a, dtype=np.int64)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(a).astype(np.int64)
    out = np.zeros(a.shape, dtype=np.int64)
    for bit in range(63):
        out += (a >> bit) & 1
    return out


def shap_brute_force(model, row, background, batch_rows: int = 200_000) -> np.ndarray:
    """Exact Shapley values by enumerating all ``2^p`` feature subsets."""
    x = np.asarray(_values(np.atleast_2d(row)), dtype=float)[0]
    Z = _values(background)
    p = len(x)
    if p > MAX_BRUTE_FORCE_FEATURES:
        raise DataError(f"brute force limited to {MAX_BRUTE_FORCE_FEATURES} features, got {p}")
    if len(Z) == 0:
        raise DataError("empty background")
    nz = len(Z)
    masks = np.arange(2 ** p, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(p)) & 1).astype(bool)
    v = np.empty(len(masks))
    per_batch = max(1, batch_rows // nz)
    columns = getattr(model, "feature_names_in_", None)
    for start in range(0, len(masks), per_batch):
        b = bits[start:start + per_batch]
        hybrid = np.where(b[:, None, :], x[None, None, :], Z[None, :, :]).reshape(-1, p)
        if columns is not None:
            hybrid = pd.DataFrame(hybrid, columns=list(columns))
        v[start:start + len(b)] = model_output(model, hybrid).reshape(len(b), nz).mean(axis=1)
    w = _shapley_weights(p)
    size = _popcount(masks)
    phi = np.empty(p)
    for i in range(p):
        without = masks[((masks >> i) & 1) == 0]
        phi[i] = np.sum(w[size[without]] * (v[without | (1 << i)] - v[without]))
    return phi


def _leaf_weight_table(p):
    # W[a, b] = a! b! / (a + b + 1)!
    W = np.zeros((p + 1, p + 1))
    for a in range(p + 1):
        for b in range(p + 1 - a):
            W[a, b] = math.exp(math.lgamma(a + 1) + math.lgamma(b + 1) - math.lgamma(a + b + 2))
    return W


def _tree_shap(tree, X, Z, W):
    """Interventional attributions of one tree, averaged over the background rows."""
    nx, nz = len(X), len(Z)
    p = X.shape[1]
    phi = np.zeros((nx, p))
    xi = np.repeat(np.arange(nx), nz)
    zi = np.tile(np.arange(nz), nx)
    empty = np.zeros(len(xi), dtype=np.int64)
    stack = [(0, xi, zi, empty, empty)]
    rec_x, rec_a, rec_b, rec_ca, rec_cb = [], [], [], [], []
    while stack:
        node, xi, zi, A, B = stack.pop()
        if tree.feature[node] < 0:
            a, b = _popcount(A), _popcount(B)
            v = tree.value[node]
            ca = np.where(a > 0, v * W[np.maximum(a - 1, 0), b], 0.0)
            cb = np.where(b > 0, v * W[a, np.maximum(b - 1, 0)], 0.0)
            keep = (a + b) > 0
            if keep.any():
                rec_x.append(xi[keep]); rec_a.append(A[keep]); rec_b.append(B[keep])
                rec_ca.append(ca[keep]); rec_cb.append(cb[keep])
            continue
        f, thr = tree.feature[node], tree.threshold[node]
        bit = np.int64(1) << np.int64(f)
        x_left = X[xi, f] <= thr
        z_left = Z[zi, f] <= thr
        in_a = (A & bit) != 0
        in_b = (B & bit) != 0
        free = ~in_a & ~in_b
        same = x_left == z_left
        for child, x_go, z_go in ((tree.left[node], x_left, z_left), (tree.right[node], ~x_left, ~z_left)):
            follow = (in_a & x_go) | (in_b & z_go) | (free & same & x_go)
            to_a = free & ~same & x_go
            to_b = free & ~same & z_go
            sel = follow | to_a | to_b
            if not sel.any():
                continue
            newA = np.where(to_a, A | bit, A)[sel]
            newB = np.where(to_b, B | bit, B)[sel]
            stack.append((child, xi[sel], zi[sel], newA, newB))
    if rec_x:
        xs = np.concatenate(rec_x)
        As, Bs = np.concatenate(rec_a), np.concatenate(rec_b)
        ca, cb = np.concatenate(rec_ca), np.concatenate(rec_cb)
        for j in set(tree.feature[tree.feature >= 0].tolist()):
            bit = np.int64(1) << np.int64(j)
            contrib = np.where((As & bit) != 0, ca, 0.0) - np.where((Bs & bit) != 0, cb, 0.0)
            phi[:, j] = np.bincount(xs, weights=contrib, minlength=nx)
    return phi / nz


def shap_tree(model, X, background, max_pairs: int = 40_000) -> np.ndarray:
    """Interventional tree-path Shapley values for every row of ``X``.

    Each (row, background row) pair walks the tree once; where the two disagree
    on a split feature not yet seen on the path, both branches are followed and
    the feature is tagged as coming from the row or from the background.  A leaf
    reached with ``a`` row-tagged and ``b`` background-tagged features adds
    ``value * (a-1)! b! / (a+b)!`` to each row-tagged feature and subtracts
    ``value * a! (b-1)! / (a+b)!`` from each background-tagged one.
    """
    if not isinstance(model, TreeEnsembleMixin):
        raise TypeError(f"{type(model).__name__} is not tree-based; use shap_brute_force")
    Xv = np.atleast_2d(_values(X)).astype(float)
    Z = _values(background).astype(float)
    if len(Z) == 0:
        raise DataError("empty background")
    p = Xv.shape[1]
    if p > 62:
        raise DataError("tree explainer supports at most 62 features")
    W = _leaf_weight_table(p)
    trees, weights, _ = model.additive_trees()
    phi = np.zeros((len(Xv), p))
    chunk = max(1, max_pairs // len(Z))
    for start in range(0, len(Xv), chunk):
        block = Xv[start:start + chunk]
        for tree, w in zip(trees, weights):
            if tree.n_nodes > 1:
                phi[start:start + chunk] += w * _tree_shap(tree, block, Z, W)
    return phi


def explain(model, X, background, method: str = "auto") -> ShapMatrix:
    """Attributions for every row of ``X`` against ``background``."""
    Xv = _values(X)
    names = list(X.column_names) if isinstance(X, DesignMatrix) else list(
        getattr(model, "feature_names_in_", [f"x{j}" for j in range(Xv.shape[1])]))
    if method == "auto":
        method = "tree" if isinstance(model, TreeEnsembleMixin) else "brute"
    if method == "tree":
        values = shap_tree(model, Xv, background)
    elif method == "brute":
        values = np.vstack([shap_brute_force(model, row, background) for row in Xv])
    else:
        raise ValueError(f"unknown method {method!r}")
    frame = lambda a: pd.DataFrame(a, columns=names) if hasattr(model, "feature_names_in_") else a
    base = float(np.mean(model_output(model, frame(_values(background)))))
    scores = model_output(model, frame(Xv))
    return ShapMatrix(values, base, names, np.asarray(scores, float), output_kind(model))


def global_importance(shap: ShapMatrix) -> GlobalImportance:
    """Mean absolute attribution per feature, largest first, ties by name."""
    if shap.values.size == 0 or shap.values.shape[0] == 0:
        raise DataError("empty attribution matrix")
    means = np.mean(np.abs(shap.values), axis=0)
    pairs = sorted(zip(shap.column_names, means.tolist()), key=lambda t: (-t[1], t[0]))
    return GlobalImportance(pairs)


def rank_normalize(column) -> np.ndarray:
    """Dense rank of each value scaled to [0, 1]; a constant column maps to 0.5."""
    uniq, inverse = np.unique(np.asarray(column, dtype=float), return_inverse=True)
    if len(uniq) == 1:
        return np.full(len(inverse), 0.5)
    return inverse / (len(uniq) - 1)


def local_summary(shap: ShapMatrix, X) -> pd.DataFrame:
    """Long table ``(row, feature, shap, norm_value)`` for beeswarm-style plots."""
    Xv = _values(X)
    if Xv.shape != shap.values.shape:
        raise DataError(f"shape mismatch: attributions {shap.values.shape} vs features {Xv.shape}")
    n, p = Xv.shape
    norm = np.column_stack([rank_normalize(Xv[:, j]) for j in range(p)]) if n else np.zeros((0, p))
    return pd.DataFrame({
        "row": np.repeat(np.arange(n), p),
        "feature": np.tile(np.asarray(shap.column_names, dtype=object), n),
        "shap": shap.values.ravel(),
        "norm_value": norm.ravel(),
    })
