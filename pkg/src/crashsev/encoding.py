"""One-hot / bin / standardize encoding and the stratified train/test split."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError
from .schema import CATEGORICAL, Dataset, DesignMatrix, column_token


class DesignEncoder(TransformerMixin, BaseEstimator):
    """Encode a :class:`Dataset` into a :class:`DesignMatrix`.

    Categorical features become indicator columns ``<feature>_<level>`` for every
    level except the first (the reference).  Binned continuous features are
    treated the same way with their bin labels, the first bin being the
    reference.  Remaining continuous features are standardized with the mean and
    population standard deviation seen in :meth:`fit`, so the statistics of the
    training split are reused for the test split.

    Columns that are constant on the fitting data are dropped with a warning.

    Parameters
    ----------
    drop_constant : bool, default=True
        Remove columns that carry no variation in the fitting data.
    """

    def __init__(self, drop_constant=True):
        self.drop_constant = drop_constant

    def fit(self, dataset: Dataset, y=None):
        if len(dataset) == 0:
            raise DataError("cannot encode an empty dataset")
        dataset.validate()
        plan = []
        for spec in dataset.schema.features:
            if spec.kind == CATEGORICAL or spec.is_binned:
                for level_idx, level in enumerate(spec.categories[1:], start=1):
                    plan.append({"name": f"{spec.name}_{column_token(level)}", "feature": spec.name,
                                 "kind": "indicator", "level_index": level_idx})
            else:
                vals = dataset.rows[spec.name].to_numpy(dtype=float)
                sd = float(vals.std())
                plan.append({"name": spec.name, "feature": spec.name, "kind": "standardized",
                             "mean": float(vals.mean()), "scale": sd if sd > 0 else 1.0})
        self.schema_ = dataset.schema
        self.plan_ = plan
        values = self._encode(dataset, plan)
        keep = np.ones(len(plan), dtype=bool)
        if self.drop_constant:
            const = np.all(values == values[:1], axis=0)
            if const.any():
                names = [c["name"] for c, k in zip(plan, const) if k]
                warnings.warn(f"dropping constant encoded columns: {names}", UserWarning, stacklevel=2)
                keep = ~const
        self.plan_ = [c for c, k in zip(plan, keep) if k]
        self.feature_names_out_ = [c["name"] for c in self.plan_]
        return self

    def _encode(self, dataset, plan):
        n = len(dataset)
        out = np.zeros((n, len(plan)))
        codes = {}
        for spec in dataset.schema.features:
            if spec.kind == CATEGORICAL:
                lookup = {lv: i for i, lv in enumerate(spec.levels)}
                codes[spec.name] = np.array([lookup[v] for v in dataset.rows[spec.name]], dtype=np.int64)
            elif spec.is_binned:
                codes[spec.name] = spec.assign_bins(dataset.rows[spec.name].to_numpy(dtype=float))
        for j, col in enumerate(plan):
            if col["kind"] == "indicator":
                out[:, j] = codes[col["feature"]] == col["level_index"]
            else:
                vals = dataset.rows[col["feature"]].to_numpy(dtype=float)
                out[:, j] = (vals - col["mean"]) / col["scale"]
        return out

    def transform(self, dataset: Dataset) -> DesignMatrix:
        check_is_fitted(self, "plan_")
        if len(dataset) == 0:
            raise DataError("cannot encode an empty dataset")
        if dataset.schema.feature_names != self.schema_.feature_names:
            raise DataError("dataset schema differs from the one the encoder was fitted on")
        dataset.validate()
        return DesignMatrix(self.feature_names_out_, self._encode(dataset, self.plan_), dataset.labels)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "plan_")
        return np.asarray(self.feature_names_out_, dtype=object)


def encode(dataset: Dataset) -> DesignMatrix:
    """Fit an encoder on ``dataset`` and encode it."""
    return DesignEncoder().fit(dataset).transform(dataset)


@dataclass
class SplitPair:
    train: object
    test: object
    train_index: np.ndarray
    test_index: np.ndarray
    seed: int
    test_fraction: float


def _apportion(counts, total):
    """Largest-remainder allocation of ``total`` proportionally to ``counts``."""
    counts = np.asarray(counts, dtype=float)
    quota = counts / counts.sum() * total
    alloc = np.floor(quota).astype(np.int64)
    remainder = quota - alloc
    # stable sort keeps lower class label first on equal remainders
    for i in np.argsort(-remainder, kind="stable")[: total - alloc.sum()]:
        alloc[i] += 1
    return alloc


def stratified_split(data, test_fraction: float = 0.2, seed: int = 42) -> SplitPair:
    """Split a Dataset or DesignMatrix into train/test keeping class proportions.

    The test size is ``round(test_fraction * n)``, apportioned across classes by
    largest remainder; rows within a class are picked by a seeded permutation.
    Index arrays are returned sorted.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labels = np.asarray(data.labels)
    classes, class_counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise DataError("stratified split needs both classes")
    if class_counts.min() < 2:
        raise DataError(f"class {classes[class_counts.argmin()]} has fewer than 2 rows")
    n = len(labels)
    n_test = int(np.floor(test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1)
    per_class = _apportion(class_counts, n_test)
    rng = np.random.default_rng(seed)
    test_parts = []
    for cls, take in zip(classes, per_class):
        members = np.flatnonzero(labels == cls)
        test_parts.append(rng.permutation(members)[:take])
    test_index = np.sort(np.concatenate(test_parts))
    mask = np.ones(n, dtype=bool)
    mask[test_index] = False
    train_index = np.flatnonzero(mask)
    return SplitPair(data.take(train_index), data.take(test_index), train_index, test_index,
                     seed, test_fraction)
