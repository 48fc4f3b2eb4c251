"""Feature schema, labeled datasets and CSV ingestion.

A schema is an ordered list of :class:`FeatureSpec` plus a binary target with a
small text vocabulary (``serious`` -> 1, ``non-serious`` -> 0).  Categorical
features drop their *first* declared level as the reference when encoded, so
the order of ``levels`` matters.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataError

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


def column_token(text) -> str:
    """Turn a level or bin label into the form used inside column names."""
    return re.sub(r"[^0-9A-Za-z]+", "_", str(text)).strip("_")


@dataclass(frozen=True)
class FeatureSpec:
    """One input feature.

    Categorical features carry ``levels`` (first one is the encoding reference)
    and optional sampling ``frequencies`` used by the synthetic generator.
    Continuous features carry a ``[minimum, maximum]`` range and optionally a
    binning rule: right-closed intervals cut at ``bin_edges`` with one label per
    interval, so ``edges=(25, 40)`` gives ``x <= 25``, ``25 < x <= 40``, ``x > 40``.
    """

    name: str
    kind: str
    levels: Optional[tuple] = None
    frequencies: Optional[tuple] = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    bin_edges: Optional[tuple] = None
    bin_labels: Optional[tuple] = None
    description: str = ""

    def __post_init__(self):
        if not self.name:
            raise ConfigError("feature name must be non-empty")
        if self.kind == CATEGORICAL:
            if not self.levels or len(self.levels) < 2:
                raise ConfigError(f"categorical feature {self.name!r} needs at least 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise ConfigError(f"feature {self.name!r} has duplicate levels")
            tokens = [column_token(lv) for lv in self.levels]
            if len(set(tokens)) != len(tokens):
                raise ConfigError(f"feature {self.name!r}: levels collide after name normalisation")
            if self.frequencies is not None:
                freqs = np.asarray(self.frequencies, dtype=float)
                if len(freqs) != len(self.levels) or np.any(freqs < 0) or freqs.sum() <= 0:
                    raise ConfigError(f"feature {self.name!r}: frequencies must be one non-negative weight per level")
        elif self.kind == CONTINUOUS:
            if self.minimum is None or self.maximum is None or not self.minimum < self.maximum:
                raise ConfigError(f"continuous feature {self.name!r} needs min < max")
            if self.bin_edges is not None:
                edges = np.asarray(self.bin_edges, dtype=float)
                if len(edges) == 0 or np.any(np.diff(edges) <= 0):
                    raise ConfigError(f"feature {self.name!r}: bin edges must be strictly increasing")
                labels = self.bin_labels or ()
                if len(labels) != len(edges) + 1:
                    raise ConfigError(f"feature {self.name!r}: need {len(edges) + 1} bin labels")
                if len(set(labels)) != len(labels):
                    raise ConfigError(f"feature {self.name!r}: bin labels must be unique")
        else:
            raise ConfigError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_binned(self) -> bool:
        return self.kind == CONTINUOUS and self.bin_edges is not None

    @property
    def categories(self) -> tuple:
        """Levels for categoricals, bin labels for binned continuous, () otherwise."""
        if self.kind == CATEGORICAL:
            return tuple(self.levels)
        if self.is_binned:
            return tuple(self.bin_labels)
        return ()

    def assign_bins(self, values) -> np.ndarray:
        """Index of the bin each value falls into."""
        return np.searchsorted(np.asarray(self.bin_edges, dtype=float), np.asarray(values, dtype=float), side="left")

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.description:
            out["description"] = self.description
        if self.kind == CATEGORICAL:
            out["levels"] = list(self.levels)
            if self.frequencies is not None:
                out["frequencies"] = list(self.frequencies)
        else:
            out["min"] = self.minimum
            out["max"] = self.maximum
            if self.is_binned:
                out["bins"] = {"edges": list(self.bin_edges), "labels": list(self.bin_labels)}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        try:
            kind = d["kind"]
            bins = d.get("bins") or {}
            return cls(
                name=d["name"],
                kind=kind,
                levels=tuple(d["levels"]) if "levels" in d else None,
                frequencies=tuple(d["frequencies"]) if d.get("frequencies") is not None else None,
                minimum=d.get("min"),
                maximum=d.get("max"),
                bin_edges=tuple(bins["edges"]) if bins else None,
                bin_labels=tuple(bins["labels"]) if bins else None,
                description=d.get("description", ""),
            )
        except KeyError as exc:
            raise ConfigError(f"feature definition missing key {exc}") from None


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple
    target_name: str = "injury_severity"
    positive_values: tuple = ("serious",)
    negative_values: tuple = ("non-serious",)

    def __post_init__(self):
        names = [f.name for f in self.features]
        if not names:
            raise ConfigError("schema declares no features")
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        if self.target_name in names:
            raise ConfigError("target name collides with a feature name")
        pos = {v.casefold() for v in self.positive_values}
        neg = {v.casefold() for v in self.negative_values}
        if not pos or not neg or pos & neg:
            raise ConfigError("target vocabulary must split into disjoint positive/negative values")

    @property
    def feature_names(self) -> list:
        return [f.name for f in self.features]

    def __getitem__(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def encode_target(self, value) -> Optional[int]:
        """1/0 for a vocabulary value, None for an empty cell; raises otherwise."""
        if value is None or (isinstance(value, float) and np.isnan(value)):
            return None
        text = str(value).strip().casefold()
        if text == "":
            return None
        if text in {v.casefold() for v in self.positive_values}:
            return 1
        if text in {v.casefold() for v in self.negative_values}:
            return 0
        raise ValueError(value)

    def subset(self, names: Sequence[str]) -> "FeatureSchema":
        keep = set(names)
        return FeatureSchema(tuple(f for f in self.features if f.name in keep), self.target_name,
                             self.positive_values, self.negative_values)

    def to_dict(self) -> dict:
        return {
            "target": {"name": self.target_name, "positive": list(self.positive_values),
                       "negative": list(self.negative_values)},
            "features": [f.to_dict() for f in self.features],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        target = d.get("target", {})
        return cls(
            features=tuple(FeatureSpec.from_dict(f) for f in d.get("features", [])),
            target_name=target.get("name", "injury_severity"),
            positive_values=tuple(target.get("positive", ["serious"])),
            negative_values=tuple(target.get("negative", ["non-serious"])),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise ConfigError(f"schema file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"schema file {path} is not valid JSON: {exc}") from None


def crash_schema(include_vehicle_year: bool = True) -> FeatureSchema:
    """The 18 driver/vehicle/road/crash/temporal/weather/area/traffic features.

    Level order is chosen so that the dropped reference levels reproduce the
    published selection column names (``driver_sobriety_condition_Sober``,
    ``crash_type_Rear_End``, ``vehicle_year_more_10``...).  ``vehicle_year``
    holds the vehicle's age in years and is optional.
    """
    with resources.files("crashsev.data").joinpath("crash_schema.json").open() as fh:
        schema = FeatureSchema.from_dict(json.load(fh))
    if not include_vehicle_year:
        schema = schema.subset([n for n in schema.feature_names if n != "vehicle_year"])
    return schema


@dataclass
class Dataset:
    """Labeled records conforming to a schema.

    ``rows`` is a DataFrame with exactly the schema's feature columns in schema
    order: strings for categoricals, floats for continuous features.
    """

    schema: FeatureSchema
    rows: pd.DataFrame
    labels: np.ndarray
    dropped_count: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.rows) != len(self.labels):
            raise DataError(f"{len(self.rows)} rows but {len(self.labels)} labels")
        if list(self.rows.columns) != self.schema.feature_names:
            raise DataError("dataset columns do not match the schema feature order")
        if not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0/1")

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.schema, self.rows.iloc[index].reset_index(drop=True), self.labels[index])

    def validate(self) -> None:
        """Check level membership and continuous ranges; raise DataError on the first violation."""
        for spec in self.schema.features:
            col = self.rows[spec.name]
            if spec.kind == CATEGORICAL:
                bad = ~col.isin(spec.levels)
                if bad.any():
                    i = int(np.flatnonzero(bad.to_numpy())[0])
                    raise DataError(f"feature {spec.name!r}: level {col.iloc[i]!r} (row {i}) absent from schema")
            else:
                vals = col.to_numpy(dtype=float)
                bad = ~np.isfinite(vals) | (vals < spec.minimum) | (vals > spec.maximum)
                if bad.any():
                    i = int(np.flatnonzero(bad)[0])
                    raise DataError(f"feature {spec.name!r}: value {vals[i]!r} (row {i}) outside "
                                    f"[{spec.minimum}, {spec.maximum}]")

    def to_csv(self, path) -> None:
        frame = self.rows.copy()
        vocab = {1: self.schema.positive_values[0], 0: self.schema.negative_values[0]}
        frame[self.schema.target_name] = [vocab[int(v)] for v in self.labels]
        frame.to_csv(path, index=False)


@dataclass
class DesignMatrix:
    """Numeric encoding of a dataset: named columns, n x p values, 0/1 labels."""

    column_names: list
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.column_names = list(self.column_names)
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise DataError("values shape does not match column names")
        if self.values.shape[0] != len(self.labels):
            raise DataError("values and labels differ in length")

    @property
    def shape(self):
        return self.values.shape

    def __len__(self) -> int:
        return self.values.shape[0]

    def take(self, index) -> "DesignMatrix":
        index = np.asarray(index, dtype=np.int64)
        return DesignMatrix(self.column_names, self.values[index], self.labels[index])

    def select(self, names: Sequence[str]) -> "DesignMatrix":
        missing = [n for n in names if n not in self.column_names]
        if missing:
            raise DataError(f"columns not in design matrix: {missing}")
        pos = [self.column_names.index(n) for n in names]
        return DesignMatrix(list(names), self.values[:, pos], self.labels)

    def to_frame(self, target_name: str = "label") -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.column_names)
        frame[target_name] = self.labels
        return frame

    def to_csv(self, path, target_name: str = "label") -> None:
        self.to_frame(target_name).to_csv(path, index=False, float_format="%.17g")


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read crash records, keep the schema columns and drop incomplete rows.

    Rows with a missing or unparseable feature value (unknown level, non-numeric
    or out-of-range continuous value, empty target) are dropped; the count is
    stored on ``Dataset.dropped_count``.  A target outside the vocabulary is an
    error reported with its 1-based data row number.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    required = schema.feature_names + [schema.target_name]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: header lacks schema columns {missing}")

    labels = []
    for i, raw in enumerate(frame[schema.target_name]):
        try:
            labels.append(schema.encode_target(raw))
        except ValueError:
            raise DataError(f"{path}: row {i + 1}: target value {raw!r} outside "
                            f"{list(schema.positive_values) + list(schema.negative_values)}") from None

    keep = np.array([lab is not None for lab in labels], dtype=bool)
    columns = {}
    for spec in schema.features:
        text = frame[spec.name].str.strip()
        if spec.kind == CATEGORICAL:
            keep &= text.isin(spec.levels).to_numpy()
            columns[spec.name] = text
        else:
            vals = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)
            ok = np.isfinite(vals) & (vals >= spec.minimum) & (vals <= spec.maximum)
            keep &= ok
            columns[spec.name] = vals

    rows = pd.DataFrame(columns)[schema.feature_names].loc[keep].reset_index(drop=True)
    y = np.array([lab for lab, k in zip(labels, keep) if k], dtype=np.int64)
    dropped = int((~keep).sum())
    if dropped:
        logger.info("dropped %d of %d rows with missing or invalid values", dropped, len(frame))
    return Dataset(schema, rows, y, dropped_count=dropped)
