"""Benchmark driver: run localizer/smoothing/method configurations over a
corpus, pick each configuration's operating threshold, and emit the metric
table plus ROC and scatter data files."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .corpus import LoadedCase, list_case_dirs, load_case
from .errors import IngestionError, ParameterError
from .image import GrayImage
from .localize import else_localize, excuse_localize, starburst_localize
from .metrics import confusion, metric_suite, roc_sweep, select_threshold
from .patches import (
    ClassifierModel,
    SplitSpec,
    extract_labeled_patches,
    load_classifier,
    patch_localize,
    split_samples,
    train_baseline_classifier,
)
from .reflex import RapdScore, assess_case
from .sizing import CropConfig, FrameMeasurement, HoughConfig, assemble_trace, measure_frames

__all__ = [
    "RunConfig",
    "DEFAULT_DECISION_THRESHOLD",
    "resolve_localizer",
    "assess_loaded_case",
    "score_corpus",
    "run_benchmark",
    "write_benchmark_outputs",
    "collect_corpus_patches",
    "train_baseline_from_corpus",
]

DEFAULT_DECISION_THRESHOLD = 0.2
LOCALIZERS = ("starburst", "excuse", "else", "patch")
RUNTIME_PATCH_SIZE = 60  # scan patch side at working resolution


@dataclass(frozen=True)
class RunConfig:
    """One pipeline configuration (one benchmark row)."""

    localizer: str = "starburst"
    crop: str = "half_image"
    smoothing: str = "mov_avg"
    method: str = "rapd_index"
    classifier_path: Optional[str] = None
    threshold: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.localizer not in LOCALIZERS:
            raise ParameterError(f"unknown localizer {self.localizer!r}")
        if self.localizer == "patch" and self.classifier_path is None:
            raise ParameterError("patch localizer requires a classifier (train one or pass a weight file)")

    @property
    def tag(self) -> str:
        return f"{self.localizer}_{self.crop}_{self.smoothing}_{self.method}"


_MODEL_CACHE: dict[str, ClassifierModel] = {}


def _cached_model(path: str) -> ClassifierModel:
    if path not in _MODEL_CACHE:
        _MODEL_CACHE[path] = load_classifier(path)
    return _MODEL_CACHE[path]


def resolve_localizer(name: str, classifier_path: Optional[str] = None) -> Callable[[GrayImage], object]:
    if name == "starburst":
        return starburst_localize
    if name == "excuse":
        return excuse_localize
    if name == "else":
        return else_localize
    if name == "patch":
        if classifier_path is None:
            raise ParameterError("patch localizer requires a classifier weight file")
        model = _cached_model(str(classifier_path))
        return lambda img: patch_localize(model, img, RUNTIME_PATCH_SIZE)
    raise ParameterError(f"unknown localizer {name!r}")


def assess_loaded_case(
    case: LoadedCase,
    config: RunConfig,
    hough: HoughConfig = HoughConfig(),
) -> tuple[RapdScore, dict, dict[str, list[FrameMeasurement]]]:
    """Full pipeline on one case: per-eye measurement, trace assembly, and
    the configured dissimilarity. Returns (score, traces, measurements)."""
    localizer = resolve_localizer(config.localizer, config.classifier_path)
    crop = CropConfig(config.crop)
    traces = {}
    measurements = {}
    for eye in ("right", "left"):
        meas = measure_frames(case.frames(eye), localizer, crop, hough)
        traces[eye] = assemble_trace(meas, eye, case.fps, case.schedule)
        measurements[eye] = meas
    score = assess_case(traces["right"], traces["left"], config.method, config.smoothing)
    return score, traces, measurements


def _score_one(case_dir: str, config: RunConfig) -> tuple[str, bool, float, bool]:
    case = load_case(case_dir)
    score, _, _ = assess_loaded_case(case, config)
    if case.label not in ("rapd_positive", "no_rapd"):
        raise ParameterError(f"case {case.case_id} lacks an RAPD label")
    return case.case_id, case.label == "rapd_positive", score.value, score.degenerate


def score_corpus(corpus_dir, config: RunConfig, workers: int = 1) -> list[tuple[str, bool, float, bool]]:
    """(case_id, label, score, degenerate) per case, ordered by case_id
    regardless of worker completion order."""
    case_dirs = [str(p) for p in list_case_dirs(corpus_dir)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_score_one, case_dirs, [config] * len(case_dirs)))
    else:
        rows = [_score_one(d, config) for d in case_dirs]
    return sorted(rows, key=lambda r: r[0])


@dataclass(frozen=True, eq=False)
class BenchmarkRow:
    config: RunConfig
    threshold: float
    metrics: dict
    auc_roc: float
    auc_pr: float
    curve: object
    scatter: list[tuple[str, bool, float]]


def run_benchmark(corpus_dir, configs: list[RunConfig], workers: int = 1) -> list[BenchmarkRow]:
    rows = []
    for config in configs:
        scored = score_corpus(corpus_dir, config, workers=workers)
        labels = [label for _, label, _, _ in scored]
        scores = [value for _, _, value, _ in scored]
        threshold = config.threshold if config.threshold is not None else select_threshold(scores, labels)
        counts = confusion(labels, [s >= threshold for s in scores])
        report = metric_suite(counts)
        curve = roc_sweep(scores, labels)
        metrics = {
            "precision": report.precision,
            "sensitivity_tpr": report.sensitivity,
            "fpr": report.fpr,
            "specificity_tnr": report.specificity,
            "fnr": report.fnr,
            "accuracy": report.accuracy,
            "f1": report.f1,
            "auc_pr": curve.auc_pr,
            "auc_roc": curve.auc_roc,
        }
        rows.append(
            BenchmarkRow(
                config=config,
                threshold=threshold,
                metrics=metrics,
                auc_roc=curve.auc_roc,
                auc_pr=curve.auc_pr,
                curve=curve,
                scatter=[(cid, label, value) for cid, label, value, _ in scored],
            )
        )
    return rows


def collect_corpus_patches(corpus_dir, patch_size: int, seed: int, frame_stride: int = 25) -> list:
    """Extract balanced labeled patches from every ground-truthed case,
    sampling every frame_stride-th frame of each eye."""
    samples = []
    for i, case_dir in enumerate(list_case_dirs(corpus_dir)):
        case = load_case(case_dir)
        if case.ground_truth is None:
            raise IngestionError(f"case {case.case_id} lacks ground truth; cannot label patches")
        for eye_index, eye in enumerate(("right", "left")):
            truth = case.truth(eye)
            frames = case.frames(eye)
            for t in range(0, len(frames), frame_stride):
                cx, cy, _ = truth[t]
                balance_seed = int(np.random.SeedSequence([seed, i, eye_index, t]).generate_state(1)[0])
                samples.extend(
                    extract_labeled_patches(frames[t], (cx, cy), patch_size, balance_seed)
                )
    return samples


def train_baseline_from_corpus(
    corpus_dir,
    patch_size: int = RUNTIME_PATCH_SIZE,
    epochs: int = 20,
    seed: int = 0,
    frame_stride: int = 25,
) -> tuple[ClassifierModel, dict]:
    """Train the logistic baseline on corpus patches with a seeded 60/20/20
    split; returns the model and its split accuracies."""
    samples = collect_corpus_patches(corpus_dir, patch_size, seed, frame_stride)
    train, val, test = split_samples(samples, SplitSpec(seed=seed))
    model = train_baseline_classifier(train, val, epochs=epochs, seed=seed)

    def accuracy(subset) -> float:
        if not subset:
            return float("nan")
        from .patches import classify_patch

        hits = sum((classify_patch(model, s.pixels) >= 0.5) == s.label for s in subset)
        return hits / len(subset)

    report = {
        "n_train": len(train),
        "n_val": len(val),
        "n_test": len(test),
        "train_accuracy": accuracy(train),
        "val_accuracy": model.val_accuracy,
        "test_accuracy": accuracy(test),
    }
    return model, report


BENCHMARK_COLUMNS = [
    "localizer", "crop", "smoothing", "method", "threshold",
    "precision", "sensitivity_tpr", "fpr", "specificity_tnr", "fnr",
    "accuracy", "f1", "auc_pr", "auc_roc",
]


def write_benchmark_outputs(rows: list[BenchmarkRow], out_dir) -> Path:
    """benchmark.csv + benchmark.json with per-config roc_*.csv and
    scatter_*.csv alongside."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / "benchmark.csv"
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCHMARK_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.config.localizer, row.config.crop, row.config.smoothing, row.config.method,
                 repr(row.threshold)]
                + [repr(row.metrics[c]) for c in BENCHMARK_COLUMNS[5:]]
            )
    with open(out_dir / "benchmark.json", "w", encoding="utf-8") as fh:
        json.dump(
            [
                {
                    "localizer": row.config.localizer,
                    "crop": row.config.crop,
                    "smoothing": row.config.smoothing,
                    "method": row.config.method,
                    "threshold": row.threshold,
                    **row.metrics,
                }
                for row in rows
            ],
            fh,
            indent=2,
        )
        fh.write("\n")

    for row in rows:
        curve = row.curve
        with open(out_dir / f"roc_{row.config.tag}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "fpr", "tpr", "precision", "recall"])
            # thresholds and pr_points are index-aligned (row 0 is the
            # +inf sentinel / recall-0 anchor)
            for t, (fpr, tpr), (recall, precision) in zip(curve.thresholds, curve.points, curve.pr_points):
                writer.writerow([repr(float(t)), repr(float(fpr)), repr(float(tpr)),
                                 repr(float(precision)), repr(float(recall))])
        with open(out_dir / f"scatter_{row.config.tag}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["case_id", "label", "score"])
            for cid, label, value in row.scatter:
                writer.writerow([cid, "rapd_positive" if label else "no_rapd", repr(value)])
    return table_path
