"""Command-line front end: generate | assess | measure | evaluate |
train-baseline.

Values resolve in order: explicit flag, then the --config JSON file, then
the built-in default. RAPDSCREEN_OUTPUT_DIR sets the default output
directory. Exit codes: 0 success, 2 parameter error, 3 pipeline failure,
4 ingestion error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from .corpus import generate_corpus, load_case
from .errors import (
    ExtractionError,
    FitError,
    IngestionError,
    LocalizationError,
    MeasurementError,
    ParameterError,
    TraceUnusableError,
    TrainingError,
    WeightFileError,
)
from .evaluate import (
    DEFAULT_DECISION_THRESHOLD,
    RunConfig,
    assess_loaded_case,
    resolve_localizer,
    run_benchmark,
    train_baseline_from_corpus,
    write_benchmark_outputs,
)
from .patches import save_classifier
from .sizing import CropConfig, HoughConfig, measure_frames
from .synth import SimParams

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_PIPELINE = 3
EXIT_INGESTION = 4

_PIPELINE_ERRORS = (LocalizationError, MeasurementError, TraceUnusableError,
                    ExtractionError, TrainingError, FitError)
_INGESTION_ERRORS = (IngestionError, WeightFileError)


def _default_output_dir() -> str:
    return os.environ.get("RAPDSCREEN_OUTPUT_DIR", "out")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise IngestionError(f"config file {path} must hold a JSON object")
    return data


def _resolve(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _sim_params_from_file(path) -> SimParams:
    overrides = _load_config_file(path)
    valid = {f.name for f in fields(SimParams)}
    unknown = set(overrides) - valid
    if unknown:
        raise ParameterError(f"unknown simulation parameters: {sorted(unknown)}")
    if "frame_size" in overrides:
        overrides["frame_size"] = tuple(overrides["frame_size"])
    return replace(SimParams(), **overrides)


# --- subcommands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _load_config_file(args.config)
    out = Path(_resolve(args, config, "out", _default_output_dir())) / "corpus"
    count = _resolve(args, config, "count_per_class", None)
    if count is None:
        raise ParameterError("--count-per-class is required")
    seed = _resolve(args, config, "seed", 0)
    alpha_range = (
        _resolve(args, config, "alpha_min", 0.2),
        _resolve(args, config, "alpha_max", 0.6),
    )
    params = _sim_params_from_file(args.params) if args.params else SimParams()
    case_ids = generate_corpus(out, count, seed, params, alpha_range)
    print(f"wrote {len(case_ids)} cases to {out} ({count} no_rapd + {count} rapd_positive,"
          f" alpha in [{alpha_range[0]}, {alpha_range[1]}], seed {seed})")
    return EXIT_OK


def _run_config_from(args, config: dict) -> RunConfig:
    return RunConfig(
        localizer=_resolve(args, config, "localizer", "starburst"),
        crop=_resolve(args, config, "crop", "half_image"),
        smoothing=_resolve(args, config, "smoothing", "mov_avg"),
        method=_resolve(args, config, "method", "rapd_index"),
        classifier_path=_resolve(args, config, "classifier", None),
        threshold=_resolve(args, config, "threshold", None),
        seed=_resolve(args, config, "seed", 0),
    )


def cmd_assess(args) -> int:
    config = _load_config_file(args.config)
    run = _run_config_from(args, config)
    out_dir = Path(_resolve(args, config, "out", _default_output_dir()))
    case = load_case(args.case)
    try:
        score, traces, _ = assess_loaded_case(case, run)
    except _PIPELINE_ERRORS as exc:
        raise type(exc)(f"case {case.case_id}: {exc}") from exc
    threshold = run.threshold if run.threshold is not None else DEFAULT_DECISION_THRESHOLD
    decision = "rapd_positive" if score.value >= threshold else "no_rapd"

    out_dir.mkdir(parents=True, exist_ok=True)
    traces_path = out_dir / f"{case.case_id}_traces.csv"
    with open(traces_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "right_radius", "left_radius"])
        for i, (r, l) in enumerate(zip(traces["right"].radii, traces["left"].radii)):
            writer.writerow([i, repr(float(r)), repr(float(l))])
    result = {
        "case_id": case.case_id,
        "method": score.method,
        "smoothing": run.smoothing,
        "delta_r": score.delta_r,
        "delta_l": score.delta_l,
        "score": score.value,
        "degenerate": score.degenerate,
        "decision": decision,
        "threshold": threshold,
    }
    result_path = out_dir / f"{case.case_id}_assessment.json"
    with open(result_path, "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    print(f"{case.case_id}: score={score.value:.4f} decision={decision} -> {result_path}")
    return EXIT_OK


def cmd_measure(args) -> int:
    config = _load_config_file(args.config)
    run = _run_config_from(args, config)
    out_dir = Path(_resolve(args, config, "out", _default_output_dir()))
    case = load_case(args.case)
    localizer = resolve_localizer(run.localizer, run.classifier_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    for eye in ("right", "left"):
        rows = measure_frames(case.frames(eye), localizer, CropConfig(run.crop), HoughConfig())
        path = out_dir / f"{case.case_id}_{eye}_measurements.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_index", "x", "y", "radius", "votes", "status"])
            for m in rows:
                writer.writerow([
                    m.frame_index,
                    "" if m.x is None else repr(float(m.x)),
                    "" if m.y is None else repr(float(m.y)),
                    "" if m.radius is None else repr(float(m.radius)),
                    "" if m.votes is None else m.votes,
                    m.status,
                ])
        ok = sum(1 for m in rows if m.status == "ok")
        print(f"{case.case_id}/{eye}: {ok}/{len(rows)} frames measured -> {path}")
    return EXIT_OK


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def cmd_evaluate(args) -> int:
    config = _load_config_file(args.config)
    out_dir = Path(_resolve(args, config, "out", _default_output_dir()))
    localizers = _split_list(_resolve(args, config, "localizers", "starburst,excuse,else"))
    crops = _split_list(_resolve(args, config, "crops", "half_image"))
    smoothings = _split_list(_resolve(args, config, "smoothings", "mov_avg"))
    methods = _split_list(_resolve(args, config, "methods", "rapd_index"))
    classifier = _resolve(args, config, "classifier", None)
    workers = _resolve(args, config, "workers", 1)
    configs = [
        RunConfig(localizer=loc, crop=crop, smoothing=smooth, method=method,
                  classifier_path=classifier)
        for loc in localizers for crop in crops for smooth in smoothings for method in methods
    ]
    rows = run_benchmark(args.corpus, configs, workers=workers)
    table_path = write_benchmark_outputs(rows, out_dir)
    header = f"{'localizer':<10} {'crop':<10} {'smooth':<8} {'method':<10} {'thr':>6} " \
             f"{'prec':>6} {'sens':>6} {'spec':>6} {'acc':>6} {'f1':>6} {'aucPR':>6} {'aucROC':>6}"
    print(header)
    for row in rows:
        m = row.metrics
        print(f"{row.config.localizer:<10} {row.config.crop:<10} {row.config.smoothing:<8} "
              f"{row.config.method:<10} {row.threshold:>6.3f} {m['precision']:>6.3f} "
              f"{m['sensitivity_tpr']:>6.3f} {m['specificity_tnr']:>6.3f} {m['accuracy']:>6.3f} "
              f"{m['f1']:>6.3f} {m['auc_pr']:>6.3f} {m['auc_roc']:>6.3f}")
    print(f"benchmark table -> {table_path}")
    return EXIT_OK


def cmd_train_baseline(args) -> int:
    config = _load_config_file(args.config)
    out_dir = Path(_resolve(args, config, "out", _default_output_dir()))
    patch_size = _resolve(args, config, "patch_size", 60)
    epochs = _resolve(args, config, "epochs", 20)
    seed = _resolve(args, config, "seed", 0)
    frame_stride = _resolve(args, config, "frame_stride", 25)
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")
    model, report = train_baseline_from_corpus(
        args.corpus, patch_size=patch_size, epochs=epochs, seed=seed, frame_stride=frame_stride
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    weights_path = Path(args.weights) if args.weights else out_dir / "baseline_classifier.json"
    save_classifier(model, weights_path)
    print(f"patches: train={report['n_train']} val={report['n_val']} test={report['n_test']}")
    print(f"accuracy: train={report['train_accuracy']:.4f} val={report['val_accuracy']:.4f} "
          f"test={report['test_accuracy']:.4f}")
    print(f"weights -> {weights_path}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rapdscreen",
        description="Automated swinging-flashlight screening: synthetic corpora, "
                    "per-case assessment, and detection benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory (default $RAPDSCREEN_OUTPUT_DIR or ./out)")
        p.add_argument("--seed", type=int, help="random seed")

    p = sub.add_parser("generate", help="write a synthetic ground-truthed corpus")
    add_common(p)
    p.add_argument("--count-per-class", type=int, dest="count_per_class",
                   help="cases per class (healthy and RAPD)")
    p.add_argument("--params", help="JSON file overriding simulation parameters")
    p.add_argument("--alpha-min", type=float, dest="alpha_min")
    p.add_argument("--alpha-max", type=float, dest="alpha_max")
    p.set_defaults(func=cmd_generate)

    def add_run_flags(p):
        p.add_argument("--localizer", choices=["starburst", "excuse", "else", "patch"])
        p.add_argument("--crop", choices=["half_image", "fixed_60"])
        p.add_argument("--smoothing", choices=["none", "mov_avg"])
        p.add_argument("--method", choices=["rapd_index", "pearson", "spearman", "kendall"])
        p.add_argument("--classifier", help="weight file for the patch localizer")

    p = sub.add_parser("assess", help="run the full pipeline on one case directory")
    add_common(p)
    add_run_flags(p)
    p.add_argument("--case", required=True, help="case directory with manifest.json")
    p.add_argument("--threshold", type=float, help="decision threshold on the score")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("measure", help="emit per-frame measurements for one case")
    add_common(p)
    add_run_flags(p)
    p.add_argument("--case", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("evaluate", help="benchmark configurations over a corpus")
    add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--localizers", help="comma list (default starburst,excuse,else)")
    p.add_argument("--crops", help="comma list of crop modes")
    p.add_argument("--smoothings", help="comma list of smoothing modes")
    p.add_argument("--methods", help="comma list of dissimilarity methods")
    p.add_argument("--classifier", help="weight file for the patch localizer")
    p.add_argument("--workers", type=int, help="case-level parallel workers")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-baseline", help="train the logistic patch classifier on a corpus")
    add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--patch-size", type=int, dest="patch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--frame-stride", type=int, dest="frame_stride")
    p.add_argument("--weights", help="output weight file path")
    p.set_defaults(func=cmd_train_baseline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except _PIPELINE_ERRORS as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except _INGESTION_ERRORS as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION


if __name__ == "__main__":
    sys.exit(main())
