"""Shapley attributions: axioms, tree-vs-enumeration equality, global ranking, local summary."""
import numpy as np
import pytest

from crashsev.encoding import encode
from crashsev.exceptions import DataError
from crashsev.explain import (ShapMatrix, explain, global_importance, local_summary, rank_normalize,
                              shap_brute_force, shap_tree)
from crashsev.models import (AdaBoostModel, DecisionTreeModel, GradientBoostingModel, LogisticModel,
                             RandomForestModel, SVMModel, Tree)
from crashsev.schema import FeatureSchema, FeatureSpec
from crashsev.synth import synth_generate

from conftest import random_design


@pytest.fixture(scope="module")
def data():
    return random_design(np.random.default_rng(11), 200, 5, 0.35)


TREE_MODELS = {
    "tree": lambda: DecisionTreeModel(max_depth=5),
    "forest": lambda: RandomForestModel(n_estimators=4, max_depth=4, random_state=2),
    "adaboost": lambda: AdaBoostModel(n_estimators=8),
    "gbt": lambda: GradientBoostingModel(n_estimators=6, max_depth=3),
}


def test_dummy_feature_gets_zero(rng):
    f = lambda X: 2 * X[:, 0] - X[:, 2]
    phi = shap_brute_force(f, rng.normal(size=4), rng.normal(size=(10, 4)))
    assert phi[1] == 0.0 and phi[3] == 0.0


def test_additive_model_closed_form(rng):
    w = np.array([1.5, -2.0, 0.5])
    f = lambda X: X @ w + 3.0
    x, Z = rng.normal(size=3), rng.normal(size=(25, 3))
    np.testing.assert_allclose(shap_brute_force(f, x, Z), w * (x - Z.mean(axis=0)), atol=1e-12)


def test_symmetric_features_equal(rng):
    f = lambda X: np.tanh(X[:, 0] + X[:, 1]) + X[:, 0] * X[:, 1]
    Z = rng.normal(size=(10, 3))
    Z[:, 1] = Z[:, 0]
    x = np.array([0.7, 0.7, -1.0])
    phi = shap_brute_force(f, x, Z)
    assert phi[0] == pytest.approx(phi[1], abs=1e-12)


@pytest.mark.parametrize("kind", list(TREE_MODELS))
def test_tree_equals_brute_force(kind, data):
    model = TREE_MODELS[kind]().fit(data)
    rows, background = data.values[:10], data.values[100:130]
    fast = shap_tree(model, rows, background)
    for i, x in enumerate(rows):
        np.testing.assert_allclose(fast[i], shap_brute_force(model, x, background), atol=1e-8)


@pytest.mark.parametrize("kind", list(TREE_MODELS))
def test_background_order_invariance(kind, data):
    model = TREE_MODELS[kind]().fit(data)
    Z = data.values[50:90]
    perm = np.random.default_rng(0).permutation(len(Z))
    np.testing.assert_allclose(shap_tree(model, data.values[:5], Z), shap_tree(model, data.values[:5], Z[perm]),
                               atol=1e-12)


def test_single_leaf_tree(data):
    model = DecisionTreeModel().fit(data)
    model.tree_ = Tree.leaf(0.3, len(data))
    m = explain(model, data.take(np.arange(5)), data.values[:20])
    assert np.all(m.values == 0) and m.base_value == pytest.approx(0.3)


def test_two_tree_ensemble_is_sum_of_parts(data):
    gbt = GradientBoostingModel(n_estimators=2, max_depth=3).fit(data)
    X, Z = data.values[:8], data.values[40:70]
    total = shap_tree(gbt, X, Z)
    parts = []
    for tree in gbt.estimators_:
        single = GradientBoostingModel(n_estimators=1).fit(data)
        single.estimators_ = [tree]
        parts.append(shap_tree(single, X, Z))
    np.testing.assert_allclose(total, parts[0] + parts[1], atol=1e-12)


def test_unused_feature_zero_in_tree(data):
    model = DecisionTreeModel(max_depth=2).fit(data)
    unused = sorted(set(range(5)) - set(model.tree_.feature[model.tree_.feature >= 0].tolist()))
    phi = shap_tree(model, data.values[:10], data.values[10:40])
    assert unused and np.all(phi[:, unused] == 0.0)


@pytest.mark.parametrize("model", [LogisticModel(C=1.0), SVMModel(C=1.0), *[f() for f in TREE_MODELS.values()]],
                         ids=["logistic", "svm", *TREE_MODELS])
def test_local_accuracy_all_kinds(model, data):
    model.fit(data)
    m = explain(model, data.take(np.arange(12)), data.values[150:180])
    assert m.local_accuracy_error() < 1e-8


def test_margin_output_for_boosting(data):
    gbt = GradientBoostingModel(n_estimators=3).fit(data)
    m = explain(gbt, data.take(np.arange(4)), data.values[:20])
    assert m.output == "margin"
    np.testing.assert_allclose(m.scores, gbt.decision_function(data.take(np.arange(4))))


def test_explainer_errors(data):
    with pytest.raises(TypeError):
        shap_tree(LogisticModel().fit(data), data.values[:2], data.values[:5])
    with pytest.raises(DataError):
        shap_brute_force(lambda X: X[:, 0], np.zeros(21), np.zeros((2, 21)))
    with pytest.raises(DataError):
        shap_brute_force(lambda X: X[:, 0], np.zeros(2), np.zeros((0, 2)))


def test_global_importance_rules():
    m = ShapMatrix(np.array([[0.5, -2.0, 0.0]]), 0.0, ["a", "b", "c"], np.array([-1.5]))
    g = global_importance(m)
    assert [f for f, _ in g.ranking] == ["b", "a", "c"]
    assert g.ranking[-1][1] == 0.0
    frame = g.to_frame()
    assert list(frame.columns) == ["feature", "mean_abs_shap", "rank"] and frame["rank"].tolist() == [1, 2, 3]


def test_local_summary_shape_and_norm():
    X = np.array([[1.0, 0.0, 5.0], [3.0, 1.0, 5.0]])
    m = ShapMatrix(np.ones((2, 3)), 0.0, ["a", "b", "c"], np.full(2, 3.0))
    table = local_summary(m, X)
    assert len(table) == 6 and list(table.columns) == ["row", "feature", "shap", "norm_value"]
    assert set(table.loc[table.feature == "b", "norm_value"]) == {0.0, 1.0}
    assert set(table.loc[table.feature == "c", "norm_value"]) == {0.5}
    np.testing.assert_allclose(rank_normalize([3, 1, 2, 3]), [1, 0, 0.5, 1])


def test_planted_feature_ranked_first():
    schema = FeatureSchema((
        FeatureSpec("driver", "categorical", levels=("no", "yes")),
        FeatureSpec("n1", "categorical", levels=("no", "yes")),
        FeatureSpec("n2", "categorical", levels=("p", "q", "r")),
        FeatureSpec("n3", "continuous", minimum=0, maximum=1),
    ))
    first = 0
    for seed in range(100):
        X = encode(synth_generate(schema, 300, 0.3, {"driver_yes": 2.5}, seed=seed))
        model = GradientBoostingModel(n_estimators=10, max_depth=2, learning_rate=0.3).fit(X)
        rng = np.random.default_rng(seed)
        m = explain(model, X.take(np.arange(60)), X.values[rng.choice(len(X), 50, replace=False)])
        first += global_importance(m).ranking[0][0] == "driver_yes"
    assert first >= 95
