"""Detection-performance metrics: confusion counts, the full rate suite,
ROC/PR curves with trapezoidal AUC, and best-operating-point selection.

Decision orientation throughout: a case is called positive iff its score
is at or above the threshold (higher dissimilarity means defect).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "ConfusionCounts",
    "MetricsReport",
    "RocCurve",
    "confusion",
    "metric_suite",
    "roc_sweep",
    "select_threshold",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ParameterError("confusion counts must be non-negative")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    sensitivity: float
    fpr: float
    specificity: float
    fnr: float
    accuracy: float
    balanced_accuracy: float
    f1: float
    precision_degenerate: bool = False


@dataclass(frozen=True, eq=False)
class RocCurve:
    points: np.ndarray  # (n, 2) of (fpr, tpr), fpr non-decreasing
    thresholds: np.ndarray  # matching decision thresholds
    auc_roc: float
    pr_points: np.ndarray  # (m, 2) of (recall, precision)
    auc_pr: float


def confusion(labels: Sequence[bool], decisions: Sequence[bool]) -> ConfusionCounts:
    """Tally decisions against ground-truth labels."""
    if len(labels) != len(decisions):
        raise ParameterError(f"length mismatch: {len(labels)} labels vs {len(decisions)} decisions")
    if len(labels) == 0:
        raise ParameterError("empty inputs")
    y = np.asarray(labels, dtype=bool)
    d = np.asarray(decisions, dtype=bool)
    return ConfusionCounts(
        tp=int((y & d).sum()),
        tn=int((~y & ~d).sum()),
        fp=int((~y & d).sum()),
        fn=int((y & ~d).sum()),
    )


def metric_suite(c: ConfusionCounts) -> MetricsReport:
    """The eight-rate suite. Precision over zero predicted positives is
    defined as 0 with the degenerate flag set."""
    if c.positives == 0 or c.negatives == 0:
        raise ParameterError("both classes must be present to compute the metric suite")
    predicted_pos = c.tp + c.fp
    precision_degenerate = predicted_pos == 0
    precision = 0.0 if precision_degenerate else c.tp / predicted_pos
    sensitivity = c.tp / c.positives
    specificity = c.tn / c.negatives
    fpr = c.fp / c.negatives
    fnr = c.fn / c.positives
    accuracy = (c.tp + c.tn) / c.total
    f1 = 0.0 if precision + sensitivity == 0 else 2 * precision * sensitivity / (precision + sensitivity)
    return MetricsReport(
        precision=precision,
        sensitivity=sensitivity,
        fpr=fpr,
        specificity=specificity,
        fnr=fnr,
        accuracy=accuracy,
        balanced_accuracy=(sensitivity + specificity) / 2.0,
        f1=f1,
        precision_degenerate=precision_degenerate,
    )


def _validate_scores(scores: Sequence[float], labels: Sequence[bool]) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if len(s) != len(y):
        raise ParameterError(f"length mismatch: {len(s)} scores vs {len(y)} labels")
    if len(s) == 0:
        raise ParameterError("empty inputs")
    if not np.isfinite(s).all():
        raise ParameterError("scores must be finite")
    if y.all() or not y.any():
        raise ParameterError("both classes must be present")
    return s, y


def roc_sweep(scores: Sequence[float], labels: Sequence[bool]) -> RocCurve:
    """Threshold sweep over the unique scores (plus a +inf sentinel).

    At each threshold, positive iff score >= threshold. ROC points run
    from (0, 0) to (1, 1); both AUCs are trapezoidal, with the PR curve
    anchored at recall 0 with its first point's precision.
    """
    s, y = _validate_scores(scores, labels)
    p = int(y.sum())
    n = len(y) - p
    # descending thresholds: +inf sentinel (nothing positive) first
    thresholds = np.concatenate([[np.inf], np.unique(s)[::-1]])
    tps = np.array([(y & (s >= t)).sum() for t in thresholds], dtype=np.float64)
    fps = np.array([(~y & (s >= t)).sum() for t in thresholds], dtype=np.float64)
    tpr = tps / p
    fpr = fps / n
    auc_roc = float(np.trapezoid(tpr, fpr))

    finite = thresholds[1:]
    recall = tps[1:] / p
    predicted = tps[1:] + fps[1:]
    precision = np.where(predicted > 0, tps[1:] / np.maximum(predicted, 1.0), 0.0)
    pr_recall = np.concatenate([[0.0], recall])
    pr_precision = np.concatenate([[precision[0]], precision])
    auc_pr = float(np.trapezoid(pr_precision, pr_recall))

    return RocCurve(
        points=np.column_stack([fpr, tpr]),
        thresholds=thresholds,
        auc_roc=auc_roc,
        pr_points=np.column_stack([pr_recall, pr_precision]),
        auc_pr=auc_pr,
    )


def select_threshold(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Threshold maximizing sensitivity + specificity; ties go to the
    smallest qualifying threshold."""
    s, y = _validate_scores(scores, labels)
    p = int(y.sum())
    n = len(y) - p
    best_threshold = math.inf
    best_value = -1.0
    for t in sorted(np.unique(s)):
        decisions = s >= t
        value = (y & decisions).sum() / p + (~y & ~decisions).sum() / n
        if value > best_value:
            best_value = value
            best_threshold = float(t)
    # the +inf sentinel (all-negative) never beats ties: smallest wins
    if 1.0 > best_value:
        return math.inf
    return best_threshold
