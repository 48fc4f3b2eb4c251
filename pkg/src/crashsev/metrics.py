"""Confusion counts, accuracy/precision/recall/F1, ROC sweep and trapezoidal AUC.

Ratios with a zero denominator are reported as ``None`` (undefined), never as
0 by convention.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .exceptions import DataError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    auc: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _binary_vector(v, name):
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    if not np.isin(arr, (0, 1)).all():
        raise DataError(f"{name} must contain only 0/1")
    return arr.astype(np.int64)


def confusion_counts(y_true, y_pred) -> ConfusionCounts:
    t = _binary_vector(y_true, "y_true")
    p = _binary_vector(y_pred, "y_pred")
    if len(t) != len(p):
        raise DataError(f"length mismatch: {len(t)} labels vs {len(p)} predictions")
    return ConfusionCounts(tp=int(np.sum((p == 1) & (t == 1))), tn=int(np.sum((p == 0) & (t == 0))),
                           fp=int(np.sum((p == 1) & (t == 0))), fn=int(np.sum((p == 0) & (t == 1))))


def _ratio(num, den):
    return num / den if den else None


def score_set(c: ConfusionCounts) -> MetricsReport:
    if c.total == 0:
        raise DataError("confusion counts are all zero")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = None
    if precision is not None and recall is not None:
        f1 = _ratio(2 * precision * recall, precision + recall)
    return MetricsReport(accuracy=(c.tp + c.tn) / c.total, precision=precision, recall=recall, f1=f1)


def roc_curve(y_true, scores) -> RocCurve:
    """ROC points for thresholds ``+inf`` then every distinct score, descending.

    At threshold ``t`` a row is predicted positive iff ``score >= t``; tied
    scores therefore move together and share a single point.
    """
    y = _binary_vector(y_true, "y_true")
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise DataError("scores and labels differ in shape")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    P, N = int(y.sum()), int(len(y) - y.sum())
    if P == 0 or N == 0:
        raise DataError("ROC/AUC undefined: y_true holds a single class")
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tps = np.cumsum(y_sorted)[last_of_group]
    fps = np.cumsum(1 - y_sorted)[last_of_group]
    return RocCurve(fpr=np.r_[0.0, fps / N], tpr=np.r_[0.0, tps / P],
                    thresholds=np.r_[math.inf, s_sorted[last_of_group]])


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve."""
    dx = np.diff(curve.fpr)
    return float(np.sum(dx * (curve.tpr[1:] + curve.tpr[:-1]) / 2.0))


def evaluate(y_true, scores, threshold: float = 0.5):
    """Metrics at ``threshold`` plus the ROC curve and its AUC."""
    labels = (np.asarray(scores, dtype=float) >= threshold).astype(np.int64)
    counts = confusion_counts(y_true, labels)
    curve = roc_curve(y_true, scores)
    base = score_set(counts)
    report = MetricsReport(base.accuracy, base.precision, base.recall, base.f1, auc(curve))
    return counts, report, curve


def scorer(name: str):
    """Map a metric name to ``f(y_true, scores) -> float`` used when tuning."""
    def from_counts(attr):
        def score(y_true, scores):
            value = getattr(score_set(confusion_counts(y_true, (np.asarray(scores) >= 0.5).astype(int))), attr)
            return float("nan") if value is None else value
        return score

    if name in ("auc", "roc_auc"):
        return lambda y_true, scores: auc(roc_curve(y_true, scores))
    if name in ("accuracy", "precision", "recall", "f1"):
        return from_counts(name)
    raise ValueError(f"unknown scoring {name!r}")
