"""Synthetic crash records with planted log-odds effects."""
from __future__ import annotations

from typing import Mapping, Optional

import numpy as np
import pandas as pd
from scipy.special import expit

from .exceptions import ConfigError
from .schema import CATEGORICAL, Dataset, FeatureSchema, column_token

# Log-odds shifts per encoded column for the default crash schema.
CRASH_EFFECTS = {
    "driver_age_41_50": 0.416514,
    "driver_sobriety_condition_Sober": -1.61658,
    "driver_age_more_60": 0.56148,
    "vehicle_type_Heavy_Vehicle": 0.68137,
    "vehicle_type_SUV": 0.458464,
    "vehicle_year_more_10": 0.441557,
    "crash_type_Rear_End": -0.31719,
    "crash_type_Sideswipe": -0.41792,
    "traffic_control_Uncontrolled": 0.971158,
    "light_condition_Dark_Lighted": -0.63837,
    "weather_condition_Clear": -0.49714,
    "area_type_Rural": -0.34533,
}


def _resolve_effects(schema: FeatureSchema, effect_table: Mapping[str, float]):
    """Map keys (``feature_level`` or ``feature=level``) to (feature, category index)."""
    lookup = {}
    for spec in schema.features:
        for i, cat in enumerate(spec.categories):
            lookup.setdefault(f"{spec.name}_{column_token(cat)}", []).append((spec.name, i))
            lookup.setdefault(f"{spec.name}={cat}", []).append((spec.name, i))
    resolved = []
    for key, shift in effect_table.items():
        hits = lookup.get(key, [])
        if len(hits) != 1:
            reason = "unknown" if not hits else "ambiguous"
            raise ConfigError(f"effect key {key!r} is {reason} for this schema")
        resolved.append((*hits[0], float(shift)))
    return resolved


def applicable_effects(schema: FeatureSchema, effect_table: Mapping[str, float]) -> dict:
    """The subset of ``effect_table`` whose keys exist in ``schema``."""
    out = {}
    for key, shift in effect_table.items():
        try:
            _resolve_effects(schema, {key: shift})
        except ConfigError:
            continue
        out[key] = shift
    return out


def synth_generate(schema: FeatureSchema, n: int, positive_rate: float = 0.12,
                   effect_table: Optional[Mapping[str, float]] = None, seed: int = 0,
                   max_bisect: int = 100, rate_tolerance: float = 0.02) -> Dataset:
    """Draw ``n`` independent records and Bernoulli labels.

    Each feature is sampled on its own: categoricals by their declared level
    frequencies (uniform when absent), continuous features uniformly on
    ``[min, max]``.  The label of a row is ``u < sigmoid(b + sum(effects))``
    with one uniform ``u`` per row; the intercept ``b`` is found by bisection
    on the realized positive share, which is non-decreasing in ``b``.
    """
    if n < 1:
        raise ConfigError("n must be positive")
    if not 0.0 < positive_rate < 1.0:
        raise ConfigError(f"positive_rate must be in (0, 1), got {positive_rate}")
    effects = _resolve_effects(schema, effect_table or {})
    rng = np.random.default_rng(seed)

    columns, codes = {}, {}
    for spec in schema.features:
        if spec.kind == CATEGORICAL:
            p = np.ones(len(spec.levels)) if spec.frequencies is None else np.asarray(spec.frequencies, float)
            idx = rng.choice(len(spec.levels), size=n, p=p / p.sum())
            codes[spec.name] = idx
            columns[spec.name] = np.asarray(spec.levels, dtype=object)[idx]
        else:
            vals = rng.uniform(spec.minimum, spec.maximum, size=n)
            columns[spec.name] = vals
            if spec.is_binned:
                codes[spec.name] = spec.assign_bins(vals)

    eta = np.zeros(n)
    for feature, cat_idx, shift in effects:
        eta += shift * (codes[feature] == cat_idx)

    u = rng.random(n)

    def share(b):
        return float(np.mean(u < expit(b + eta)))

    lo, hi = -60.0, 60.0
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if share(mid) < positive_rate:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    best = min((lo, hi), key=lambda b: abs(share(b) - positive_rate))
    if abs(share(best) - positive_rate) > rate_tolerance:
        raise ConfigError(f"positive_rate {positive_rate} unreachable: bisection ended at share "
                          f"{share(best):.4f}")
    labels = (u < expit(best + eta)).astype(np.int64)
    rows = pd.DataFrame(columns)[schema.feature_names]
    return Dataset(schema, rows, labels)
