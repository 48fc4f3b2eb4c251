"""SMOTE oversampling of the minority class."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_X_y

from .exceptions import DataError
from .schema import DesignMatrix


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.k_neighbors) < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must be in (0, 1]")


def _knn_indices(points: np.ndarray, k: int) -> np.ndarray:
    """k nearest other points (Euclidean), ties broken by lower index."""
    m = len(points)
    chunk = max(1, 4_000_000 // max(1, m * points.shape[1]))
    out = np.empty((m, k), dtype=np.int64)
    for start in range(0, m, chunk):
        block = points[start:start + chunk]
        # explicit differences keep equal distances bit-identical for the tie rule
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        d2[np.arange(len(block)), np.arange(start, start + len(block))] = np.inf
        out[start:start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


class SMOTE(BaseEstimator):
    """Synthetic minority oversampling.

    Every synthetic row is ``x_i + u * (x_nn - x_i)`` with ``u ~ U(0, 1)`` and
    ``x_nn`` drawn uniformly from the ``k_neighbors`` nearest minority rows of
    the minority row ``x_i``.  Synthetic rows are appended after the original
    rows, which are returned untouched and in order.

    The number of rows to create is ``round(target_ratio * n_majority) -
    n_minority``; when that is not positive the input is returned as is.  Base
    rows are used round-robin (each gets ``N // m`` samples, a seeded random
    subset one extra), and each base row draws from its own generator seeded by
    ``(random_state, row index)`` so results do not depend on evaluation order.

    Parameters
    ----------
    k_neighbors : int, default=5
    target_ratio : float, default=1.0
        Minority/majority ratio to reach.
    random_state : int, default=0
    """

    def __init__(self, k_neighbors=5, target_ratio=1.0, random_state=0):
        self.k_neighbors = k_neighbors
        self.target_ratio = target_ratio
        self.random_state = random_state

    def fit_resample(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes, counts = np.unique(y, return_counts=True)
        if len(classes) != 2:
            raise DataError("SMOTE needs exactly two classes")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must be in (0, 1]")
        minority = classes[np.argmin(counts)] if counts[0] != counts[1] else classes[1]
        n_min, n_maj = counts.min(), counts.max()
        k = int(self.k_neighbors)
        if k < 1:
            raise ValueError("k_neighbors must be >= 1")
        if k >= n_min:
            raise DataError(f"k_neighbors={k} must be smaller than the minority count {n_min}")

        n_new = int(np.floor(self.target_ratio * n_maj + 0.5)) - n_min
        self.minority_class_ = minority
        self.n_synthetic_ = max(n_new, 0)
        if n_new <= 0:
            self.sample_origin_ = np.empty((0, 2), dtype=np.int64)
            return X.copy(), y.copy()

        min_idx = np.flatnonzero(y == minority)
        pts = X[min_idx]
        nn = _knn_indices(pts, k)

        base_count = np.full(len(min_idx), n_new // len(min_idx), dtype=np.int64)
        extra = np.random.default_rng([int(self.random_state), len(min_idx)]).permutation(len(min_idx))
        base_count[np.sort(extra[: n_new % len(min_idx)])] += 1

        new_rows, origin = [], []
        for i in np.flatnonzero(base_count):
            rng = np.random.default_rng([int(self.random_state), int(i)])
            c = base_count[i]
            pick = nn[i, rng.integers(0, k, size=c)]
            gap = rng.random(c)
            new_rows.append(pts[i] + gap[:, None] * (pts[pick] - pts[i]))
            origin.append(np.column_stack([np.full(c, min_idx[i]), min_idx[pick]]))
        X_new = np.vstack(new_rows)
        # (seed row, neighbour row) in input indexing, one per synthetic row
        self.sample_origin_ = np.vstack(origin)
        return np.vstack([X, X_new]), np.concatenate([y, np.full(len(X_new), minority, dtype=y.dtype)])


def smote(train: DesignMatrix, config: SmoteConfig = SmoteConfig()) -> DesignMatrix:
    """Oversample the minority class of a training matrix."""
    sampler = SMOTE(config.k_neighbors, config.target_ratio, config.seed)
    X, y = sampler.fit_resample(train.values, train.labels)
    return DesignMatrix(train.column_names, X, y)
