"""Reflex-trace assessment: smoothing, per-eye constriction amplitudes,
the RAPD dissimilarity index, and correlation-based alternatives.

A dissimilarity near 0 means both pupils reacted alike; values toward 1
(or 2 for the correlation variants) flag asymmetric reactions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ParameterError

__all__ = [
    "StimInterval",
    "ReflexTrace",
    "ReflexSummary",
    "RapdScore",
    "median_filter_1d",
    "moving_average",
    "pupil_delta",
    "rapd_index",
    "correlation_dissimilarity",
    "assess_case",
]

MEDIAN_WINDOW = 5
MOVING_AVERAGE_WINDOW = 5
PRE_WINDOW_LEAD_SECONDS = 0.5  # lookback for the pre-stimulation maximum


@dataclass(frozen=True)
class StimInterval:
    """Half-open frame interval [start, end) during which one eye is lit."""

    eye_stimulated: str
    start_frame: int
    end_frame: int


@dataclass(frozen=True, eq=False)
class ReflexTrace:
    """Per-eye radius time series with the stimulation schedule."""

    eye: str
    fps: float
    radii: np.ndarray
    schedule: tuple[StimInterval, ...] = ()
    smoothed: Optional[np.ndarray] = None

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=np.float64)
        if radii.ndim != 1 or len(radii) == 0:
            raise ParameterError("radii must be a non-empty 1-D array")
        if (radii <= 0).any():
            raise ParameterError("radii must all be positive")
        object.__setattr__(self, "radii", radii)
        last_end = 0
        for iv in sorted(self.schedule, key=lambda iv: iv.start_frame):
            if iv.start_frame < last_end:
                raise ParameterError("schedule intervals overlap")
            if iv.end_frame > len(radii) or iv.start_frame < 0:
                raise ParameterError("schedule interval outside trace length")
            last_end = iv.end_frame

    def with_smoothed(self, smoothed: np.ndarray) -> "ReflexTrace":
        return replace(self, smoothed=np.asarray(smoothed, dtype=np.float64))


@dataclass(frozen=True)
class ReflexSummary:
    delta_r: float
    delta_l: float
    windows_right: int
    windows_left: int


@dataclass(frozen=True)
class RapdScore:
    """Dissimilarity value with its method tag and delta provenance."""

    value: float
    method: str
    degenerate: bool = False
    delta_r: Optional[float] = None
    delta_l: Optional[float] = None


def median_filter_1d(x: Sequence[float], window: int) -> np.ndarray:
    """Sliding median; borders use the truncated window. The median of an
    even-sized (truncated) window is the lower middle order statistic, so
    every output value is one of the inputs."""
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be odd and >= 1, got {window}")
    arr = np.asarray(x, dtype=np.float64)
    half = window // 2
    out = np.empty_like(arr)
    for i in range(len(arr)):
        win = np.sort(arr[max(0, i - half) : i + half + 1])
        out[i] = win[(len(win) - 1) // 2]
    return out


def moving_average(x: Sequence[float], window: int) -> np.ndarray:
    """Centered mean over truncated windows; length preserved."""
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    arr = np.asarray(x, dtype=np.float64)
    half_left = (window - 1) // 2
    half_right = window // 2
    csum = np.concatenate([[0.0], np.cumsum(arr)])
    idx = np.arange(len(arr))
    lo = np.maximum(idx - half_left, 0)
    hi = np.minimum(idx + half_right + 1, len(arr))
    return (csum[hi] - csum[lo]) / (hi - lo)


def pupil_delta(trace: ReflexTrace, lead_seconds: float = PRE_WINDOW_LEAD_SECONDS) -> float:
    """Mean constriction amplitude over this eye's direct-stimulation
    windows: (pre-window maximum) - (in-window minimum), clamped at zero.
    Falls back to the global smoothed range when no window applies."""
    if trace.smoothed is None:
        raise ParameterError("pupil_delta requires a smoothed trace")
    s = trace.smoothed
    direct = [iv for iv in trace.schedule if iv.eye_stimulated == trace.eye]
    if not direct:
        return float(s.max() - s.min())
    lead = int(round(lead_seconds * trace.fps))
    amplitudes = []
    for iv in direct:
        pre = s[max(0, iv.start_frame - lead) : iv.start_frame + 1]
        during = s[iv.start_frame : iv.end_frame]
        if len(pre) == 0 or len(during) == 0:
            continue
        amplitudes.append(max(float(pre.max() - during.min()), 0.0))
    if not amplitudes:
        return float(s.max() - s.min())
    return float(np.mean(amplitudes))


def rapd_index(delta_r: float, delta_l: float) -> RapdScore:
    """Dissimilarity 1 - min(|dR|, |dL|) / max(|dR|, |dL|) in [0, 1].

    Two unreactive pupils (0/0) score 0.0 with the degenerate flag set so
    callers can surface a warning instead of a fabricated asymmetry.
    """
    if not (math.isfinite(delta_r) and math.isfinite(delta_l)):
        raise ParameterError(f"deltas must be finite, got ({delta_r}, {delta_l})")
    lo = min(abs(delta_r), abs(delta_l))
    hi = max(abs(delta_r), abs(delta_l))
    if hi == 0.0:
        return RapdScore(0.0, "rapd_index", degenerate=True, delta_r=delta_r, delta_l=delta_l)
    return RapdScore(1.0 - lo / hi, "rapd_index", delta_r=delta_r, delta_l=delta_l)


def correlation_dissimilarity(a: Sequence[float], b: Sequence[float], kind: str) -> RapdScore:
    """1 minus the named correlation of the two traces, in [0, 2].

    Traces are aligned by truncating both to the shorter length. Spearman
    rank-transforms with average ranks on ties; Kendall is the tau-b
    variant. Zero-variance input degenerates to 1.0 (correlation 0).
    """
    if kind not in ("pearson", "spearman", "kendall"):
        raise ParameterError(f"unknown correlation kind {kind!r}")
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    n = min(len(x), len(y))
    if n < 3:
        raise ParameterError(f"need >= 3 aligned samples, got {n}")
    x, y = x[:n], y[:n]
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return RapdScore(1.0, kind, degenerate=True)
    if kind == "kendall":
        r = float(stats.kendalltau(x, y).statistic)
    else:
        if kind == "spearman":
            x = stats.rankdata(x)
            y = stats.rankdata(y)
        xc = x - x.mean()
        yc = y - y.mean()
        r = float((xc @ yc) / np.sqrt((xc @ xc) * (yc @ yc)))
    return RapdScore(float(np.clip(1.0 - r, 0.0, 2.0)), kind)


def _smooth(trace: ReflexTrace, smoothing: str) -> ReflexTrace:
    s = median_filter_1d(trace.radii, MEDIAN_WINDOW)
    if smoothing == "mov_avg":
        s = moving_average(s, MOVING_AVERAGE_WINDOW)
    elif smoothing != "none":
        raise ParameterError(f"unknown smoothing {smoothing!r}")
    return trace.with_smoothed(s)


def summarize_deltas(right: ReflexTrace, left: ReflexTrace) -> ReflexSummary:
    return ReflexSummary(
        delta_r=pupil_delta(right),
        delta_l=pupil_delta(left),
        windows_right=sum(1 for iv in right.schedule if iv.eye_stimulated == "right"),
        windows_left=sum(1 for iv in left.schedule if iv.eye_stimulated == "left"),
    )


def assess_case(right: ReflexTrace, left: ReflexTrace, method: str = "rapd_index",
                smoothing: str = "mov_avg") -> RapdScore:
    """Full assessment of one test case: median filter (always), optional
    moving average, then the requested dissimilarity."""
    right_s = _smooth(right, smoothing)
    left_s = _smooth(left, smoothing)
    if method == "rapd_index":
        summary = summarize_deltas(right_s, left_s)
        return rapd_index(summary.delta_r, summary.delta_l)
    return correlation_dissimilarity(right_s.smoothed, left_s.smoothed, method)
