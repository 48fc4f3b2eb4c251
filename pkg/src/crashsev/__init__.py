"""Crash injury severity classification: SMOTE, logit selection, six classifiers, SHAP."""
from .encoding import DesignEncoder, encode, stratified_split
from .exceptions import ConfigError, ConvergenceError, CrashsevError, DataError, ModelingError
from .explain import global_importance, local_summary, shap_brute_force, shap_tree
from .metrics import auc, confusion_counts, evaluate, roc_curve, score_set
from .models import MODEL_KINDS, fit_model, load_model, make_model, save_model
from .pipeline import Pipeline, RunConfig, emit_report, run_pipeline
from .resampling import SMOTE, SmoteConfig, smote
from .schema import Dataset, DesignMatrix, FeatureSchema, FeatureSpec, crash_schema, load_csv
from .selection import LogitSelector, fit_logit_wald, select_significant
from .synth import synth_generate
from .tuning import Grid, grid_search, stratified_kfold

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConvergenceError", "CrashsevError", "DataError", "Dataset", "DesignEncoder",
    "DesignMatrix", "FeatureSchema", "FeatureSpec", "Grid", "LogitSelector", "MODEL_KINDS", "ModelingError",
    "Pipeline", "RunConfig", "SMOTE", "SmoteConfig", "auc", "confusion_counts", "crash_schema", "emit_report",
    "encode", "evaluate", "fit_logit_wald", "fit_model", "global_importance", "grid_search",
    "load_csv", "load_model", "local_summary", "make_model", "roc_curve", "run_pipeline", "save_model",
    "score_set", "select_significant", "shap_brute_force", "shap_tree", "smote", "stratified_kfold",
    "stratified_split", "synth_generate",
]
