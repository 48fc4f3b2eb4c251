"""The six classifier families behind one fit / score contract."""
import inspect
import json
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError, DataError
from ._tree import Tree, grow_tree
from .base import BinaryClassifier, TreeEnsembleMixin
from .boosting import AdaBoostModel, GradientBoostingModel
from .logistic import LogisticModel
from .svm import SVMModel, rbf_kernel
from .trees import DecisionTreeModel, RandomForestModel

MODEL_KINDS = {
    "logistic": LogisticModel,
    "tree": DecisionTreeModel,
    "forest": RandomForestModel,
    "svm": SVMModel,
    "adaboost": AdaBoostModel,
    "gbt": GradientBoostingModel,
}

DISPLAY_NAMES = {
    "logistic": "Logistic Regression",
    "tree": "Decision tree",
    "forest": "Random forest",
    "svm": "SVM",
    "adaboost": "Adaboost",
    "gbt": "XGBoost",
}

# best grid points of the reference study, used as fixed parameters when not tuning
REFERENCE_PARAMS = {
    "logistic": {"C": 0.0015, "penalty": "l2", "solver": "newton-cg"},
    "tree": {"criterion": "entropy", "max_depth": 23, "min_samples_leaf": 1},
    "forest": {"criterion": "gini", "max_depth": 19, "max_features": "sqrt", "n_estimators": 50},
    "svm": {"C": 9, "gamma": "auto", "kernel": "rbf"},
    "adaboost": {"algorithm": "SAMME.R", "learning_rate": 0.85, "n_estimators": 25},
    "gbt": {"gamma": 1, "learning_rate": 0.75, "max_depth": 13, "n_estimators": 25},
}

FORMAT_VERSION = 1


def model_class(kind):
    try:
        return MODEL_KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}") from None


def make_model(kind, params=None, seed=0) -> BinaryClassifier:
    """Instantiate an unfitted model, rejecting hyperparameters the kind does not know."""
    cls = model_class(kind)
    params = dict(params or {})
    accepted = set(inspect.signature(cls.__init__).parameters) - {"self"}
    unknown = sorted(set(params) - accepted)
    if unknown:
        raise ConfigError(f"invalid hyperparameter {unknown[0]!r} for {kind}: not recognized")
    if "random_state" in accepted:
        params.setdefault("random_state", seed)
    model = cls(**params)
    model._validate_params()
    return model


def fit_model(kind, params, X, seed=0) -> BinaryClassifier:
    """Fit a model of ``kind`` on a DesignMatrix."""
    return make_model(kind, params, seed).fit(X)


def predict_proba(model, X) -> np.ndarray:
    """Probability of class 1 (serious) for each row."""
    return model.predict_proba(X)[:, 1]


def predict_label(model, X, threshold=0.5) -> np.ndarray:
    """1 where the class-1 probability is at least ``threshold``."""
    return model.predict(X, threshold=threshold)


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def model_to_dict(model: BinaryClassifier) -> dict:
    params = {k: _jsonable(v) for k, v in model.get_params().items()}
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "params": params,
        "columns": [str(c) for c in model.feature_names_in_],
        "state": model._get_state(),
    }


def model_from_dict(doc: dict) -> BinaryClassifier:
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('format_version')!r}")
    model = make_model(doc["kind"], doc["params"])
    model.classes_ = np.array([0, 1])
    model.feature_names_in_ = np.asarray(doc["columns"], dtype=object)
    model.n_features_in_ = len(doc["columns"])
    model._set_state(doc["state"])
    return model


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def load_model(path) -> BinaryClassifier:
    return model_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "AdaBoostModel", "BinaryClassifier", "DecisionTreeModel", "GradientBoostingModel", "LogisticModel",
    "MODEL_KINDS", "RandomForestModel", "REFERENCE_PARAMS", "SVMModel", "Tree", "TreeEnsembleMixin",
    "fit_model", "grow_tree", "load_model", "make_model", "model_from_dict", "model_to_dict",
    "predict_label", "predict_proba", "rbf_kernel", "save_model",
]
