"""Stratified k-fold cross-validation and exhaustive grid search."""
from __future__ import annotations

import inspect
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .exceptions import ConfigError, CrashsevError, DataError
from .metrics import scorer
from .models import make_model, model_class
from .resampling import SmoteConfig, smote
from .schema import DesignMatrix

logger = logging.getLogger(__name__)


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold number for every row.

    Rows of each class are shuffled with a seeded permutation and dealt
    round-robin; the deal continues across classes, so fold sizes differ by at
    most one and each class is spread as evenly as possible.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigError("k must be at least 2")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < k:
        raise DataError(f"class {classes[counts.argmin()]} has {counts.min()} rows, fewer than k={k}")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in classes:
        members = rng.permutation(np.flatnonzero(labels == cls))
        folds[members] = (offset + np.arange(len(members))) % k
        offset += len(members)
    return folds


@dataclass
class Grid:
    kind: str
    values: dict

    def __post_init__(self):
        cls = model_class(self.kind)
        if not self.values:
            raise ConfigError(f"empty grid for {self.kind}")
        accepted = set(inspect.signature(cls.__init__).parameters) - {"self", "random_state"}
        for key, vals in self.values.items():
            if key not in accepted:
                raise ConfigError(f"grid key {key!r} not recognized for {self.kind}")
            if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                raise ConfigError(f"grid key {key!r} needs a non-empty list of values")

    def combinations(self) -> list:
        """Cartesian product in row-major order (first key varies slowest)."""
        keys = list(self.values)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.values[k] for k in keys))]


@dataclass
class CVRow:
    params: dict
    fold_scores: list
    mean_score: float
    error: Optional[str] = None


@dataclass
class TuneResult:
    kind: str
    best_params: dict
    best_score: float
    cv_table: list
    scoring: str
    folds: int
    seed: int
    fold_assignment: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or (isinstance(x, float) and math.isinf(x)) else x
        return {
            "kind": self.kind, "best_params": self.best_params, "best_score": num(self.best_score),
            "scoring": self.scoring, "folds": self.folds, "seed": self.seed,
            "cv_table": [{"params": r.params, "fold_scores": r.fold_scores, "mean_score": num(r.mean_score),
                          "error": r.error} for r in self.cv_table],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _evaluate_cell(kind, params, X, folds, k, score_fn, smote_config, seed):
    scores = []
    for fold in range(k):
        train_rows = np.flatnonzero(folds != fold)
        val_rows = np.flatnonzero(folds == fold)
        fold_train = X.take(train_rows)
        if smote_config is not None:
            cfg = SmoteConfig(smote_config.k_neighbors, smote_config.target_ratio, smote_config.seed + fold)
            fold_train = smote(fold_train, cfg)
        model = make_model(kind, params, seed).fit(fold_train)
        val = X.take(val_rows)
        score = score_fn(val.labels, model.predict_proba(val)[:, 1])
        scores.append(0.0 if math.isnan(score) else float(score))
    return scores


def grid_search(kind: str, grid: Grid, train: DesignMatrix, k: int = 5, scoring: str = "auc",
                smote_config: Optional[SmoteConfig] = None, seed: int = 0, n_jobs: int = 1) -> TuneResult:
    """Score every grid cell by k-fold CV and return the best one.

    SMOTE, when configured, is applied to the k-1 training folds of each split
    only; validation folds are never resampled.  A cell whose fit fails in any
    fold scores ``-inf``.  Undefined fold scores (e.g. F1 with no predicted
    positives) count as 0.  Ties go to the earliest cell in grid order.
    """
    if grid.kind != kind:
        raise ConfigError(f"grid is for {grid.kind}, not {kind}")
    if len(np.unique(train.labels)) < 2:
        raise DataError("training data must contain both classes")
    score_fn = scorer(scoring)
    folds = stratified_kfold(train.labels, k, seed)
    cells = grid.combinations()

    def run(params):
        try:
            return _evaluate_cell(kind, params, train, folds, k, score_fn, smote_config, seed), None
        except (CrashsevError, ValueError, np.linalg.LinAlgError) as exc:
            logger.warning("%s %s failed: %s", kind, params, exc)
            return None, f"{type(exc).__name__}: {exc}"

    if n_jobs == 1:
        outcomes = [run(p) for p in cells]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(delayed(run)(p) for p in cells)

    table = []
    for params, (scores, error) in zip(cells, outcomes):
        if scores is None:
            table.append(CVRow(params, [], -math.inf, error))
        else:
            table.append(CVRow(params, scores, float(np.mean(scores))))
    best_i = 0
    for i, row in enumerate(table):
        if row.mean_score > table[best_i].mean_score:
            best_i = i
    return TuneResult(kind, dict(table[best_i].params), table[best_i].mean_score, table, scoring, k, seed, folds)
