"""Schema, CSV ingestion, encoding, stratified split and the synthetic generator."""
import warnings

import numpy as np
import pandas as pd
import pytest

from crashsev.encoding import DesignEncoder, encode, stratified_split
from crashsev.exceptions import ConfigError, DataError
from crashsev.schema import Dataset, DesignMatrix, FeatureSchema, FeatureSpec, crash_schema, load_csv
from crashsev.selection import fit_logit_wald, select_significant
from crashsev.synth import CRASH_EFFECTS, synth_generate


def small_schema():
    return FeatureSchema((
        FeatureSpec("gender", "categorical", levels=("Male", "Female")),
        FeatureSpec("age", "continuous", minimum=16, maximum=90, bin_edges=(25, 40, 50, 60),
                    bin_labels=("upto_25", "26_40", "41_50", "51_60", "more_60")),
        FeatureSpec("speed", "continuous", minimum=0, maximum=100),
    ))


def small_dataset(rows, labels):
    schema = small_schema()
    return Dataset(schema, pd.DataFrame(rows, columns=schema.feature_names), labels)


# --- schema ----------------------------------------------------------------

def test_crash_schema_has_table_features():
    schema = crash_schema()
    assert len(schema.features) == 19
    assert len(crash_schema(include_vehicle_year=False).features) == 18
    assert schema["driver_age"].categories == ("upto_25", "26_40", "41_50", "51_60", "more_60")


def test_schema_round_trip(tmp_path):
    schema = crash_schema()
    schema.save(tmp_path / "s.json")
    assert FeatureSchema.load(tmp_path / "s.json") == schema


@pytest.mark.parametrize("spec", [
    dict(name="a", kind="categorical", levels=("x",)),
    dict(name="a", kind="categorical", levels=("x", "x")),
    dict(name="a", kind="continuous", minimum=1, maximum=1),
    dict(name="a", kind="continuous", minimum=0, maximum=9, bin_edges=(3, 2), bin_labels=("a", "b", "c")),
    dict(name="a", kind="continuous", minimum=0, maximum=9, bin_edges=(3,), bin_labels=("a",)),
    dict(name="a", kind="ordinal"),
])
def test_invalid_feature_specs_rejected(spec):
    with pytest.raises(ConfigError):
        FeatureSpec(**spec)


def test_bins_are_right_closed():
    spec = small_schema()["age"]
    assert spec.assign_bins([25, 25.5, 40, 45, 50, 60, 61]).tolist() == [0, 1, 1, 2, 2, 3, 4]


def test_target_vocabulary():
    schema = crash_schema()
    assert schema.encode_target("Serious") == 1
    assert schema.encode_target(" non-serious ") == 0
    assert schema.encode_target("") is None
    with pytest.raises(ValueError):
        schema.encode_target("fatal")


# --- load_csv ----------------------------------------------------------------

def write_csv(path, rows, header=("gender", "age", "speed", "injury_severity")):
    frame = pd.DataFrame(rows, columns=list(header))
    frame.to_csv(path, index=False)
    return path


def test_load_csv_drops_incomplete_rows(tmp_path):
    path = write_csv(tmp_path / "d.csv", [["Male", "30", "50", "serious"],
                                          ["Female", "", "40", "non-serious"],
                                          ["Female", "70", "10", "non-serious"]])
    ds = load_csv(path, small_schema())
    assert len(ds) == 2 and ds.dropped_count == 1
    assert ds.labels.tolist() == [1, 0]


def test_load_csv_ignores_extra_columns(tmp_path):
    schema = crash_schema(include_vehicle_year=False)
    data = synth_generate(schema, 20, 0.3, seed=1)
    data.to_csv(tmp_path / "full.csv")
    frame = pd.read_csv(tmp_path / "full.csv")
    frame.insert(3, "extra_a", 1)
    frame["extra_b"] = "zzz"
    frame.to_csv(tmp_path / "extra.csv", index=False)
    ds = load_csv(tmp_path / "extra.csv", schema)
    assert list(ds.rows.columns) == schema.feature_names and len(schema.feature_names) == 18
    assert len(ds) == 20 and ds.dropped_count == 0
    np.testing.assert_array_equal(ds.labels, data.labels)


def test_load_csv_all_negative(tmp_path):
    path = write_csv(tmp_path / "d.csv", [["Male", "30", "50", "non-serious"],
                                          ["Female", "45", "40", "non-serious"]])
    assert load_csv(path, small_schema()).labels.tolist() == [0, 0]


def test_load_csv_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "missing.csv", small_schema())
    path = write_csv(tmp_path / "h.csv", [["Male", "30", "serious"]], header=("gender", "age", "injury_severity"))
    with pytest.raises(DataError, match="speed"):
        load_csv(path, small_schema())
    path = write_csv(tmp_path / "t.csv", [["Male", "30", "50", "serious"], ["Male", "30", "50", "fatal"]])
    with pytest.raises(DataError, match="row 2"):
        load_csv(path, small_schema())


def test_csv_round_trip(tmp_path):
    schema = crash_schema()
    data = synth_generate(schema, 50, 0.3, CRASH_EFFECTS, seed=3)
    data.to_csv(tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv", schema)
    np.testing.assert_array_equal(back.labels, data.labels)
    np.testing.assert_allclose(back.rows["driver_age"].to_numpy(float), data.rows["driver_age"].to_numpy(float))
    assert (back.rows["crash_type"] == data.rows["crash_type"]).all()


# --- encoding ----------------------------------------------------------------

def test_age_binning_and_reference_drop():
    ds = small_dataset([["Female", 45.0, 10.0], ["Male", 20.0, 30.0], ["Male", 70.0, 50.0]], [1, 0, 0])
    X = DesignEncoder(drop_constant=False).fit(ds).transform(ds)
    assert X.column_names == ["gender_Female", "age_26_40", "age_41_50", "age_51_60", "age_more_60", "speed"]
    row = dict(zip(X.column_names, X.values[0]))
    assert row["age_41_50"] == 1 and row["age_26_40"] == 0 and row["age_51_60"] == 0 and row["age_more_60"] == 0
    assert row["gender_Female"] == 1


def test_gender_single_indicator():
    schema = FeatureSchema((FeatureSpec("gender", "categorical", levels=("Male", "Female")),))
    ds = Dataset(schema, pd.DataFrame({"gender": ["Male", "Female", "Female"]}), [0, 1, 0])
    X = encode(ds)
    assert X.column_names == ["gender_Female"]
    assert X.values[:, 0].tolist() == [0, 1, 1]


def test_standardization_uses_train_statistics():
    train = small_dataset([["Male", 30.0, 10.0], ["Female", 45.0, 30.0]], [0, 1])
    test = small_dataset([["Male", 30.0, 50.0]], [0])
    enc = DesignEncoder(drop_constant=False).fit(train)
    speed = enc.transform(test).select(["speed"]).values[0, 0]
    assert speed == pytest.approx((50 - 20) / 10)
    np.testing.assert_allclose(enc.transform(train).select(["speed"]).values[:, 0], [-1, 1])


def test_constant_continuous_column_removed_with_warning():
    ds = small_dataset([["Male", 30.0, 42.0], ["Female", 45.0, 42.0], ["Female", 65.0, 42.0]], [0, 1, 0])
    with pytest.warns(UserWarning, match="speed"):
        enc = DesignEncoder().fit(ds)
    assert "speed" not in enc.get_feature_names_out()
    keep_all = DesignEncoder(drop_constant=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        keep_all.fit(ds)
    col = keep_all.transform(ds).select(["speed"]).values[:, 0]
    assert np.all(col == 0.0)
    assert [c for c in keep_all.plan_ if c["name"] == "speed"][0]["scale"] == 1.0


def test_encoder_rejects_unknown_level_and_empty():
    ds = small_dataset([["Male", 30.0, 1.0], ["Other", 45.0, 2.0]], [0, 1])
    with pytest.raises(DataError, match="Other"):
        encode(ds)
    with pytest.raises(DataError):
        encode(small_dataset([], []))


def test_encoder_is_sklearn_estimator():
    from sklearn.base import clone
    enc = DesignEncoder(drop_constant=False)
    assert clone(enc).get_params() == {"drop_constant": False}


# --- split --------------------------------------------------------------------

def labels_only(y):
    return DesignMatrix(["a"], np.zeros((len(y), 1)), y)


def test_split_proportional_rounding():
    y = np.array([0] * 88 + [1] * 12)
    split = stratified_split(labels_only(y), 0.2, seed=0)
    assert len(split.test) == 20
    assert (split.test.labels == 0).sum() in (17, 18)
    assert set(split.train_index).isdisjoint(split.test_index)
    assert len(split.train_index) + len(split.test_index) == 100


def test_split_deterministic_and_seed_sensitive():
    y = np.array([0] * 70 + [1] * 30)
    a = stratified_split(labels_only(y), 0.2, seed=5)
    b = stratified_split(labels_only(y), 0.2, seed=5)
    c = stratified_split(labels_only(y), 0.2, seed=6)
    np.testing.assert_array_equal(a.test_index, b.test_index)
    assert not np.array_equal(a.test_index, c.test_index)


def test_split_invariants_random(rng):
    for _ in range(50):
        n = int(rng.integers(10, 300))
        y = (rng.random(n) < rng.uniform(0.1, 0.5)).astype(int)
        y[:2], y[2:4] = 0, 1
        frac = float(rng.uniform(0.1, 0.5))
        s = stratified_split(labels_only(y), frac, seed=int(rng.integers(1000)))
        for part in (s.train, s.test):
            expected = y.mean() * len(part)
            assert abs(part.labels.sum() - expected) <= 1.0


def test_split_requires_two_rows_per_class():
    with pytest.raises(DataError):
        stratified_split(labels_only(np.array([0, 1])), 0.5, seed=0)
    with pytest.raises(DataError):
        stratified_split(labels_only(np.array([0, 0, 0])), 0.5, seed=0)


# --- synthetic generator ---------------------------------------------------

def test_synth_rate_without_effects():
    data = synth_generate(crash_schema(), 4520, 0.12, {}, seed=0)
    assert 0.10 <= data.labels.mean() <= 0.14
    data.validate()


def test_synth_deterministic():
    a = synth_generate(crash_schema(), 300, 0.12, CRASH_EFFECTS, seed=9)
    b = synth_generate(crash_schema(), 300, 0.12, CRASH_EFFECTS, seed=9)
    pd.testing.assert_frame_equal(a.rows, b.rows)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_synth_null_effects_small_z():
    data = synth_generate(crash_schema(), 4000, 0.3, {k: 0.0 for k in CRASH_EFFECTS}, seed=4)
    fit = fit_logit_wald(encode(data))
    # 35 null coefficients: |z| beyond 4 would be a 1-in-10^3 event for the whole set
    assert np.max(np.abs(fit.z_scores)) < 4.0


def test_synth_planted_effect_detected():
    schema = FeatureSchema((
        FeatureSpec("a", "categorical", levels=("no", "yes")),
        FeatureSpec("b", "categorical", levels=("no", "yes")),
        FeatureSpec("c", "continuous", minimum=0, maximum=1),
    ))
    hits = 0
    for seed in range(100):
        data = synth_generate(schema, 200, 0.5, {"a_yes": 3.0}, seed=seed)
        report = select_significant(fit_logit_wald(encode(data)), 0.10)
        hits += "a_yes" in report.kept
    assert hits >= 95


def test_synth_rejects_bad_config():
    with pytest.raises(ConfigError):
        synth_generate(crash_schema(), 10, 1.5)
    with pytest.raises(ConfigError, match="unknown"):
        synth_generate(crash_schema(), 10, 0.2, {"nope_yes": 1.0})
    accepted = synth_generate(crash_schema(), 200, 0.3, {"crash_type=Rear_End": -0.3}, seed=0)
    assert len(accepted) == 200
