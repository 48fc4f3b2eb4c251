"""End-to-end run: data -> split -> selection -> tuning -> refit -> test metrics -> SHAP."""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .explain import explain as shap_explain, global_importance, local_summary
from .encoding import DesignEncoder, stratified_split
from .exceptions import ConfigError, CrashsevError, DataError, ModelingError
from .metrics import evaluate
from .models import DISPLAY_NAMES, MODEL_KINDS, REFERENCE_PARAMS, fit_model, load_model, save_model
from .resampling import SmoteConfig, smote
from .schema import FeatureSchema, crash_schema, load_csv
from .selection import fit_logit_wald, select_significant
from .synth import CRASH_EFFECTS, applicable_effects, synth_generate
from .tuning import Grid, grid_search

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "seed": 42,
    "data": {"synth": {"n": 4520, "positive_rate": 0.12, "effects": "default"}},
    "schema": None,
    "split": {"test_fraction": 0.2},
    "smote": {"k_neighbors": 5, "target_ratio": 1.0},
    "selection": {"alpha": 0.10},
    "models": list(MODEL_KINDS),
    "grids": {},
    "params": {},
    "cv": {"folds": 5, "scoring": "auc"},
    "threshold": 0.5,
    "explain": {"model": "gbt", "background_size": 100, "max_rows": None},
    "output_dir": "crashsev_run",
}


def default_grids() -> dict:
    with resources.files("crashsev.data").joinpath("default_config.json").open() as fh:
        return json.load(fh)["grids"]


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("data", "grids", "params"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    """Validated run configuration; relative paths resolve against ``base_dir``."""

    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "RunConfig":
        cfg = cls(_merge(DEFAULT_CONFIG, doc), Path(base_dir) if base_dir else Path.cwd())
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc, path.parent)

    def validate(self) -> None:
        r = self.raw
        data = r.get("data") or {}
        if ("csv" in data) == ("synth" in data):
            raise ConfigError("data must name exactly one source: 'csv' or 'synth'")
        if "csv" in data and not self.path(data["csv"]).exists():
            raise ConfigError(f"data file not found: {self.path(data['csv'])}")
        if r.get("schema") and not self.path(r["schema"]).exists():
            raise ConfigError(f"schema file not found: {self.path(r['schema'])}")
        unknown = [m for m in r["models"] if m not in MODEL_KINDS]
        if unknown or not r["models"]:
            raise ConfigError(f"models must be a non-empty subset of {list(MODEL_KINDS)}; got {r['models']}")
        if len(set(r["models"])) != len(r["models"]):
            raise ConfigError("models listed twice")
        if not 0 < r["split"]["test_fraction"] < 1:
            raise ConfigError("split.test_fraction must be in (0, 1)")
        if not 0 < r["selection"]["alpha"] <= 1:
            raise ConfigError("selection.alpha must be in (0, 1]")
        if r["cv"]["scoring"] not in ("auc", "accuracy", "recall", "precision", "f1"):
            raise ConfigError(f"unknown scoring {r['cv']['scoring']!r}")
        if int(r["cv"]["folds"]) < 2:
            raise ConfigError("cv.folds must be >= 2")
        if r["explain"] and r["explain"].get("model") not in (None, *MODEL_KINDS):
            raise ConfigError(f"explain.model must be one of {list(MODEL_KINDS)}")
        for kind in self.models:
            Grid(kind, self.grid(kind))
        if r["smote"]:
            try:
                self.smote_config()
            except ValueError as exc:
                raise ConfigError(f"smote: {exc}") from None

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def models(self) -> list:
        return list(self.raw["models"])

    def grid(self, kind) -> dict:
        return self.raw["grids"].get(kind) or default_grids()[kind]

    def smote_config(self) -> Optional[SmoteConfig]:
        s = self.raw["smote"]
        if not s:
            return None
        return SmoteConfig(int(s.get("k_neighbors", 5)), float(s.get("target_ratio", 1.0)),
                           int(s.get("seed", self.seed)))

    @property
    def output_dir(self) -> Path:
        return self.path(self.raw["output_dir"])

    def digest(self) -> str:
        """Hash of the settings that determine results (the output location is excluded)."""
        settings = {k: v for k, v in self.raw.items() if k != "output_dir"}
        return hashlib.sha256(json.dumps(settings, sort_keys=True).encode()).hexdigest()


def _fmt(x):
    return "undefined" if x is None else f"{x:.4f}"


def _json_dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


class Pipeline:
    """Stateful runner; each stage writes its artifacts under ``output_dir``."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = config.output_dir
        self.manifest = {"config_sha256": config.digest(), "seed": config.seed, "stages": [],
                         "test_access": []}
        # Wall-clock timings live in their own file so every other artifact is reproducible byte for byte.
        self.timings = {}
        self._prepared = False

    # -- stages ---------------------------------------------------------
    def _stage(self, name, fn, *args):
        start = time.perf_counter()
        try:
            result = fn(*args)
        except CrashsevError as exc:
            self.manifest["failed_stage"] = name
            self.write_manifest()
            raise type(exc)(f"stage {name}: {exc}") from exc
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            self.manifest["failed_stage"] = name
            self.write_manifest()
            raise ModelingError(f"stage {name}: {exc}") from exc
        self.manifest["stages"].append(name)
        self.timings[name] = round(time.perf_counter() - start, 3)
        return result

    def write_manifest(self):
        self.out.mkdir(parents=True, exist_ok=True)
        _json_dump(self.manifest, self.out / "manifest.json")
        _json_dump(self.timings, self.out / "timings.json")

    def schema(self) -> FeatureSchema:
        s = self.config.raw.get("schema")
        return FeatureSchema.load(self.config.path(s)) if s else crash_schema()

    def load_data(self):
        data = self.config.raw["data"]
        schema = self.schema()
        if "csv" in data:
            return load_csv(self.config.path(data["csv"]), schema)
        syn = data["synth"]
        effects = syn.get("effects", "default")
        if effects == "default":
            effects = applicable_effects(schema, CRASH_EFFECTS)
        return synth_generate(schema, int(syn.get("n", 4520)), float(syn.get("positive_rate", 0.12)),
                              effects, int(syn.get("seed", self.config.seed)))

    def prepare(self):
        """Load, split, encode and run the logit selection (idempotent)."""
        if self._prepared:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        dataset = self._stage("ingest", self.load_data)
        split_cfg = self.config.raw["split"]
        split = self._stage("split", stratified_split, dataset, float(split_cfg["test_fraction"]),
                            int(split_cfg.get("seed", self.config.seed)))
        self.encoder = DesignEncoder().fit(split.train)
        self.train_full = self.encoder.transform(split.train)
        self._test_full = self.encoder.transform(split.test)
        self.selection = self._stage("select", self._select)
        self.train = self.train_full.select(self.selection.kept)
        self.features = list(self.selection.kept)
        self.manifest["data"] = {"rows": len(dataset), "dropped": dataset.dropped_count,
                                 "train_rows": len(split.train), "test_rows": len(split.test),
                                 "train_positive_share": float(split.train.labels.mean()),
                                 "test_positive_share": float(split.test.labels.mean()),
                                 "encoded_columns": len(self.train_full.column_names),
                                 "selected_columns": len(self.features)}
        self._prepared = True

    def _select(self):
        fit = fit_logit_wald(self.train_full)
        alpha = float(self.config.raw["selection"]["alpha"])
        report = select_significant(fit, alpha)
        report.to_csv(self.out / "selection_report.csv")
        if not report.kept:
            logger.warning("no column significant at alpha=%s; keeping all columns", alpha)
            report.kept = list(fit.column_names)
            self.manifest["selection_fallback"] = "no significant columns; all kept"
        return report

    def test_matrix(self, kind):
        """The held-out test rows; each model may read them once."""
        if kind in self.manifest["test_access"]:
            raise ModelingError(f"test partition already read for {kind}")
        self.manifest["test_access"].append(kind)
        return self._test_full.select(self.features)

    def tune(self, kind):
        self.prepare()
        cv = self.config.raw["cv"]
        result = self._stage(f"tune:{kind}", grid_search, kind, Grid(kind, self.config.grid(kind)), self.train,
                             int(cv["folds"]), cv["scoring"], self.config.smote_config(),
                             int(cv.get("seed", self.config.seed)))
        (self.out / "tune").mkdir(exist_ok=True)
        result.to_json(self.out / "tune" / f"{kind}.json")
        return result

    def chosen_params(self, kind):
        tuned = self.out / "tune" / f"{kind}.json"
        if tuned.exists():
            return json.loads(tuned.read_text())["best_params"]
        return self.config.raw["params"].get(kind, REFERENCE_PARAMS[kind])

    def refit_train(self):
        cfg = self.config.smote_config()
        return smote(self.train, cfg) if cfg else self.train

    def train_model(self, kind, params=None):
        self.prepare()
        params = self.chosen_params(kind) if params is None else params
        model = self._stage(f"train:{kind}", fit_model, kind, params, self.refit_train(), self.config.seed)
        (self.out / "models").mkdir(exist_ok=True)
        save_model(model, self.out / "models" / f"{kind}.json")
        return model

    def evaluate_model(self, kind, model=None):
        self.prepare()
        if model is None:
            model = load_model(self.out / "models" / f"{kind}.json")

        def run():
            test = self.test_matrix(kind)
            scores = model.predict_proba(test)[:, 1]
            counts, report, curve = evaluate(test.labels, scores, float(self.config.raw["threshold"]))
            (self.out / "roc").mkdir(exist_ok=True)
            curve.to_csv(self.out / "roc" / f"{kind}.csv")
            return {"kind": kind, "model": DISPLAY_NAMES[kind], **report.to_dict(),
                    "tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn}

        return self._stage(f"evaluate:{kind}", run)

    def write_comparison(self, rows):
        frame = pd.DataFrame(rows, columns=["kind", "model", "accuracy", "recall", "auc", "precision", "f1",
                                            "tp", "tn", "fp", "fn"])
        frame.to_csv(self.out / "comparison_table.csv", index=False, float_format="%.17g", na_rep="undefined")
        _json_dump(rows, self.out / "metrics.json")

    def explain_model(self, kind=None, model=None):
        self.prepare()
        ecfg = self.config.raw["explain"] or {}
        kind = kind or ecfg.get("model") or self.config.models[-1]
        if model is None:
            model = load_model(self.out / "models" / f"{kind}.json")

        def run():
            rng = np.random.default_rng(int(ecfg.get("seed", self.config.seed)))
            bg_n = min(int(ecfg.get("background_size", 100)), len(self.train))
            background = self.train.take(np.sort(rng.choice(len(self.train), size=bg_n, replace=False)))
            rows = self._test_full.select(self.features)
            max_rows = ecfg.get("max_rows")
            if max_rows is not None and max_rows < len(rows):
                rows = rows.take(np.sort(rng.choice(len(rows), size=int(max_rows), replace=False)))
            matrix = shap_explain(model, rows, background.values)
            err = matrix.local_accuracy_error()
            if not err < 1e-8:
                raise ModelingError(f"local accuracy violated by {err:.3g}")
            global_importance(matrix).to_csv(self.out / "shap_global.csv")
            local_summary(matrix, rows).to_csv(self.out / "shap_local.csv", index=False,
                                                    float_format="%.17g")
            _json_dump({"model": kind, "output": matrix.output, "base_value": matrix.base_value,
                        "rows": int(len(rows)), "background_rows": bg_n, "local_accuracy_error": err},
                       self.out / "shap_meta.json")
            return matrix

        return self._stage(f"explain:{kind}", run)

    def run(self):
        self.prepare()
        rows = []
        models = {}
        for kind in self.config.models:
            self.tune(kind)
            models[kind] = self.train_model(kind)
        for kind in self.config.models:
            rows.append(self.evaluate_model(kind, models[kind]))
        self.write_comparison(rows)
        target = (self.config.raw["explain"] or {}).get("model")
        if self.config.raw["explain"]:
            if target not in models:
                target = self.config.models[-1]
            self.explain_model(target, models[target])
        report = emit_report(self.out)
        (self.out / "report.md").write_text(report)
        self.write_manifest()
        return self.out


def run_pipeline(config: RunConfig) -> Path:
    """Execute the full run and return the output directory."""
    return Pipeline(config).run()


def best_model(rows):
    """Index of the row with the highest recall, ties broken by AUC then order."""
    def key(r):
        rec = r.get("recall")
        a = r.get("auc")
        return (-math.inf if rec is None else rec, -math.inf if a is None else a)
    best = 0
    for i, r in enumerate(rows):
        if key(r) > key(rows[best]):
            best = i
    return best


def emit_report(out_dir, top_k: int = 10) -> str:
    """Markdown summary of a completed run."""
    out = Path(out_dir)
    metrics_path = out / "metrics.json"
    if not metrics_path.exists():
        raise DataError(f"missing artifact {metrics_path}; run the pipeline first")
    rows = json.loads(metrics_path.read_text())
    if not rows:
        raise DataError("metrics.json holds no models")
    best = best_model(rows)
    lines = ["# Model comparison (held-out test set)", "",
             "| Model | Accuracy | Recall | AUC | Precision | F1 |", "|---|---|---|---|---|---|"]
    for i, r in enumerate(rows):
        mark = " **(best)**" if i == best else ""
        lines.append(f"| {r['model']}{mark} | {_fmt(r['accuracy'])} | {_fmt(r['recall'])} | {_fmt(r['auc'])} | "
                     f"{_fmt(r['precision'])} | {_fmt(r['f1'])} |")
    lines += ["", f"Best model by recall (ties by AUC): {rows[best]['model']}", ""]
    tune_dir = out / "tune"
    if tune_dir.exists():
        lines += ["## Best parameters", ""]
        for r in rows:
            path = tune_dir / f"{r['kind']}.json"
            if path.exists():
                lines.append(f"- {r['model']}: {json.dumps(json.loads(path.read_text())['best_params'], sort_keys=True)}")
        lines.append("")
    shap_path = out / "shap_global.csv"
    if shap_path.exists():
        meta = json.loads((out / "shap_meta.json").read_text()) if (out / "shap_meta.json").exists() else {}
        g = pd.read_csv(shap_path).head(top_k)
        lines += [f"## Top {len(g)} features by mean |SHAP| ({DISPLAY_NAMES.get(meta.get('model'), '')})", ""]
        for _, r in g.iterrows():
            lines.append(f"{int(r['rank'])}. {r['feature']}: {r['mean_abs_shap']:.4f}")
        lines.append("")
    return "\n".join(lines)
