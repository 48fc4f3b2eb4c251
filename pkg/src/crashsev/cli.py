"""Command line entry point: ``crashsev <subcommand> --config run.json``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError, CrashsevError
from .models import DISPLAY_NAMES
from .pipeline import Pipeline, RunConfig, emit_report
from .schema import crash_schema

logger = logging.getLogger("crashsev")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_MODEL = 0, 2, 3, 4


def _config_from_args(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        base = path.parent
    else:
        doc, base = {}, Path.cwd()
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "out", None):
        doc["output_dir"] = str(Path(args.out).resolve())
    if getattr(args, "models", None):
        doc["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "scoring", None):
        doc.setdefault("cv", {})["scoring"] = args.scoring
    if getattr(args, "no_smote", False):
        doc["smote"] = None
    else:
        for flag, key in (("smote_k", "k_neighbors"), ("smote_ratio", "target_ratio")):
            if getattr(args, flag, None) is not None:
                smote_doc = doc.get("smote")
                doc["smote"] = dict(smote_doc if isinstance(smote_doc, dict) else {})
                doc["smote"][key] = getattr(args, flag)
    return RunConfig.from_dict(doc, base)


def cmd_synth(args):
    cfg = _config_from_args(args)
    pipe = Pipeline(cfg)
    dataset = pipe.load_data()
    out = Path(args.csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_csv(out)
    if args.schema_out:
        pipe.schema().save(args.schema_out)
    print(f"wrote {len(dataset)} rows ({dataset.labels.mean():.3f} positive) to {out}")


def cmd_ingest(args):
    pipe = Pipeline(_config_from_args(args))
    pipe.prepare()
    pipe.train_full.to_csv(pipe.out / "encoded_train.csv")
    pipe.write_manifest()
    print(json.dumps(pipe.manifest["data"], indent=2))


def cmd_select(args):
    pipe = Pipeline(_config_from_args(args))
    pipe.prepare()
    pipe.write_manifest()
    print(pipe.selection.to_frame().to_string(index=False))
    print(f"\nkept {len(pipe.selection.kept)} columns at alpha={pipe.selection.alpha}")


def cmd_tune(args):
    pipe = Pipeline(_config_from_args(args))
    print("Model | Best Parameters")
    for kind in pipe.config.models:
        result = pipe.tune(kind)
        print(f"{DISPLAY_NAMES[kind]} | {json.dumps(result.best_params, sort_keys=True)} "
              f"(mean {result.scoring} {result.best_score:.4f})")
    pipe.write_manifest()


def cmd_train(args):
    pipe = Pipeline(_config_from_args(args))
    for kind in pipe.config.models:
        pipe.train_model(kind)
        print(f"trained {kind} -> {pipe.out / 'models' / (kind + '.json')}")
    pipe.write_manifest()


def cmd_evaluate(args):
    pipe = Pipeline(_config_from_args(args))
    rows = [pipe.evaluate_model(kind) for kind in pipe.config.models]
    pipe.write_comparison(rows)
    pipe.write_manifest()
    print(emit_report(pipe.out))


def cmd_explain(args):
    pipe = Pipeline(_config_from_args(args))
    matrix = pipe.explain_model(args.model)
    pipe.write_manifest()
    print(f"explained {len(matrix.values)} rows; local accuracy error {matrix.local_accuracy_error():.2e}")


def cmd_run(args):
    out = Pipeline(_config_from_args(args)).run()
    print((out / "report.md").read_text())


def cmd_report(args):
    if args.out:
        out = Path(args.out)
    else:
        out = _config_from_args(args).output_dir
    print(emit_report(out))


def cmd_schema(args):
    crash_schema().save(args.path)
    print(f"wrote {args.path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashsev", description="Crash injury severity classification pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, models=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output directory")
        if models:
            p.add_argument("--models", help="comma-separated model kinds, e.g. logistic,adaboost")
            p.add_argument("--scoring", choices=["auc", "accuracy", "recall", "precision", "f1"])
            p.add_argument("--no-smote", action="store_true", help="disable SMOTE")
            p.add_argument("--smote-k", type=int, help="SMOTE nearest neighbours")
            p.add_argument("--smote-ratio", type=float, help="SMOTE minority/majority target ratio")
        p.set_defaults(func=fn)
        return p

    p = add("synth", cmd_synth, "write a synthetic crash CSV", models=False)
    p.add_argument("--csv", required=True, help="destination CSV")
    p.add_argument("--schema-out", help="also write the schema JSON here")
    add("ingest", cmd_ingest, "load, split and encode; dump the encoded training matrix", models=False)
    add("select", cmd_select, "logit feature selection report", models=False)
    add("tune", cmd_tune, "grid-search CV for each model")
    add("train", cmd_train, "fit each model (tuned params if present) on the SMOTE-resampled training split")
    add("evaluate", cmd_evaluate, "score trained models on the test split")
    p = add("explain", cmd_explain, "SHAP values for one trained model")
    p.add_argument("--model", choices=sorted(DISPLAY_NAMES), help="model kind to explain")
    add("run", cmd_run, "full pipeline")
    add("report", cmd_report, "render the summary of a finished run", models=False)
    p = sub.add_parser("schema", help="write the built-in crash feature schema")
    p.add_argument("path")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CrashsevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
