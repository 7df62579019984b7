import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rapdscreen import ParameterError
from rapdscreen.reflex import (
    RapdScore,
    ReflexTrace,
    StimInterval,
    assess_case,
    correlation_dissimilarity,
    median_filter_1d,
    moving_average,
    pupil_delta,
    rapd_index,
)
from rapdscreen.synth import SimParams, build_schedule, radius_schedule


# --- median filter ------------------------------------------------------------


def brute_median(x, window):
    """Truncated-window sliding median, lower-middle order statistic."""
    half = window // 2
    out = []
    for i in range(len(x)):
        win = sorted(x[max(0, i - half) : i + half + 1])
        out.append(win[(len(win) - 1) // 2])
    return out


def test_median_removes_outlier():
    assert median_filter_1d([5, 100, 5, 5, 5], 3).tolist() == [5, 5, 5, 5, 5]


def test_median_constant_unchanged():
    assert median_filter_1d([7.5] * 9, 5).tolist() == [7.5] * 9


def test_median_window_one_is_identity():
    x = [3.0, 1.0, 4.0, 1.0, 5.0]
    assert median_filter_1d(x, 1).tolist() == x


def test_median_rejects_even_window():
    with pytest.raises(ParameterError):
        median_filter_1d([1, 2, 3], 4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.sampled_from([1, 3, 5, 7]))
def test_median_matches_brute_force_and_multiset(x, window):
    out = median_filter_1d(x, window)
    assert out.tolist() == brute_median(x, window)
    values = set(x)
    assert all(v in values for v in out)
    assert out.min() >= min(x) and out.max() <= max(x)


# --- moving average --------------------------------------------------------------


def test_moving_average_constant_unchanged():
    assert moving_average([4.0] * 7, 5).tolist() == [4.0] * 7


def test_moving_average_center_value():
    out = moving_average([0, 10, 0, 10, 0], 5)
    assert out[2] == pytest.approx(4.0)


def test_moving_average_window_one_identity():
    x = [3.0, 1.0, 4.0]
    assert moving_average(x, 1).tolist() == x


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.integers(1, 9))
def test_moving_average_stays_in_range(x, window):
    out = moving_average(x, window)
    assert len(out) == len(x)
    assert out.min() >= min(x) - 1e-9 and out.max() <= max(x) + 1e-9


# --- pupil_delta -------------------------------------------------------------------


def make_trace(radii, schedule=(), eye="right", fps=10.0, smoothed=True):
    trace = ReflexTrace(eye=eye, fps=fps, radii=np.asarray(radii, dtype=float), schedule=schedule)
    return trace.with_smoothed(trace.radii) if smoothed else trace


def test_delta_constant_trace_is_zero():
    schedule = (StimInterval("right", 10, 30),)
    assert pupil_delta(make_trace([20.0] * 60, schedule)) == 0.0


def test_delta_square_wave_recovers_amplitude():
    p = SimParams(noise_sigma=0.0)
    n, schedule = build_schedule(p)
    radii = np.full(n, 25.0)
    for iv in schedule:
        if iv.eye_stimulated == "right":
            radii[iv.start_frame : iv.end_frame] = 15.0
    trace = make_trace(radii, schedule)
    assert pupil_delta(trace) == pytest.approx(10.0, abs=1.0)


def test_delta_fallback_uses_global_range():
    assert pupil_delta(make_trace([14.0, 20.0, 24.0, 18.0])) == pytest.approx(10.0)


def test_delta_requires_smoothed_trace():
    with pytest.raises(ParameterError):
        pupil_delta(make_trace([10.0, 11.0], smoothed=False))


# --- rapd_index -----------------------------------------------------------------------


def test_index_examples():
    assert rapd_index(3, 3).value == 0.0
    assert rapd_index(4, 1).value == pytest.approx(0.75)
    assert rapd_index(0, 2).value == 1.0
    degenerate = rapd_index(0, 0)
    assert degenerate.value == 0.0 and degenerate.degenerate


def test_index_rejects_non_finite():
    with pytest.raises(ParameterError):
        rapd_index(float("nan"), 1.0)
    with pytest.raises(ParameterError):
        rapd_index(1.0, float("inf"))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0.01, 100))
def test_index_symmetry_scale_and_range(a, b, k):
    s1 = rapd_index(a, b)
    s2 = rapd_index(b, a)
    assert s1.value == s2.value
    assert 0.0 <= s1.value <= 1.0
    if not s1.degenerate:
        scaled = rapd_index(k * a, k * b)
        assert scaled.value == pytest.approx(s1.value, abs=1e-9)


def test_index_monotone_in_delta_r():
    dl = 5.0
    below = [rapd_index(x, dl).value for x in np.linspace(0, dl, 20)]
    above = [rapd_index(x, dl).value for x in np.linspace(dl, 50, 20)]
    assert all(a >= b - 1e-12 for a, b in zip(below, below[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(above, above[1:]))


# --- correlations ------------------------------------------------------------------------


def brute_kendall_tau_b(x, y):
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i, j in itertools.combinations(range(n), 2):
        dx = x[i] - x[j]
        dy = y[i] - y[j]
        if dx == 0 and dy == 0:
            ties_x += 1
            ties_y += 1
        elif dx == 0:
            ties_x += 1
        elif dy == 0:
            ties_y += 1
        elif dx * dy > 0:
            concordant += 1
        else:
            discordant += 1
    n0 = n * (n - 1) / 2
    denom = np.sqrt((n0 - ties_x) * (n0 - ties_y))
    return (concordant - discordant) / denom


def test_identical_traces_score_zero():
    a = [1.0, 2.0, 3.0, 2.0, 4.0]
    for kind in ("pearson", "spearman", "kendall"):
        assert correlation_dissimilarity(a, a, kind).value == pytest.approx(0.0, abs=1e-12)


def test_anticorrelated_traces_score_two():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    b = -a + 7
    for kind in ("pearson", "spearman"):
        assert correlation_dissimilarity(a, b, kind).value == pytest.approx(2.0, abs=1e-12)


def test_kendall_hand_example():
    score = correlation_dissimilarity([1, 2, 3, 4], [1, 3, 2, 4], "kendall")
    assert score.value == pytest.approx(1.0 - 2.0 / 3.0, abs=1e-12)


def test_zero_variance_degenerates():
    score = correlation_dissimilarity([1.0, 1.0, 1.0], [1.0, 2.0, 3.0], "pearson")
    assert score.degenerate and score.value == 1.0


def test_correlation_rejects_short_traces():
    with pytest.raises(ParameterError):
        correlation_dissimilarity([1.0, 2.0], [1.0, 2.0], "pearson")


def test_correlation_truncates_to_shorter():
    a = [1.0, 2.0, 3.0, 99.0]
    b = [2.0, 4.0, 6.0]
    assert correlation_dissimilarity(a, b, "pearson").value == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=3, max_size=15), st.data())
def test_kendall_matches_brute_force(x, data):
    y = data.draw(st.lists(st.integers(-5, 5), min_size=len(x), max_size=len(x)))
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    score = correlation_dissimilarity(np.float64(x), np.float64(y), "kendall")
    assert score.value == pytest.approx(1.0 - brute_kendall_tau_b(x, y), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-100, 100), min_size=4, max_size=20, unique=True))
def test_rank_methods_invariant_to_monotone_transform(x):
    y = sorted(x)
    transform = lambda arr: np.exp(np.asarray(arr) / 50.0)
    for kind in ("spearman", "kendall"):
        base = correlation_dissimilarity(x, y, kind).value
        mapped = correlation_dissimilarity(transform(x), transform(y), kind).value
        assert base == pytest.approx(mapped, abs=1e-9)


# --- assess_case ------------------------------------------------------------------------------


def synth_traces(alpha=None, affected="left", noise=0.0, seed=0):
    gains = {"gain_right": 1.0, "gain_left": 1.0}
    if alpha is not None:
        gains[f"gain_{affected}"] = alpha
    p = SimParams(noise_sigma=0.0, **gains)
    n, schedule = build_schedule(p)
    rng = np.random.default_rng(seed)
    right = radius_schedule(p, "right") + rng.normal(0, noise, n)
    left = radius_schedule(p, "left") + rng.normal(0, noise, n)
    return (
        ReflexTrace("right", p.fps, np.maximum(right, 1.0), schedule),
        ReflexTrace("left", p.fps, np.maximum(left, 1.0), schedule),
    )


def test_assess_healthy_case_scores_low():
    right, left = synth_traces(noise=0.3, seed=5)
    score = assess_case(right, left, "rapd_index", "mov_avg")
    assert score.value <= 0.15


def test_assess_rapd_case_scores_near_one_minus_alpha():
    right, left = synth_traces(alpha=0.4, noise=0.1, seed=6)
    score = assess_case(right, left, "rapd_index", "mov_avg")
    assert score.value == pytest.approx(0.6, abs=0.1)
    assert score.delta_r is not None and score.delta_l is not None


def test_assess_swapped_eyes_same_index():
    right, left = synth_traces(alpha=0.3, noise=0.2, seed=7)
    a = assess_case(right, left, "rapd_index", "mov_avg")
    # mirror the whole case: traces swap eyes and the schedule relabels
    mirror = {"right": "left", "left": "right"}
    mirrored = tuple(
        StimInterval(mirror[iv.eye_stimulated], iv.start_frame, iv.end_frame)
        for iv in right.schedule
    )
    swapped_right = ReflexTrace("right", right.fps, left.radii, mirrored)
    swapped_left = ReflexTrace("left", left.fps, right.radii, mirrored)
    b = assess_case(swapped_right, swapped_left, "rapd_index", "mov_avg")
    assert a.value == pytest.approx(b.value, abs=1e-9)
    assert b.delta_r == pytest.approx(a.delta_l, abs=1e-9)
    assert b.delta_l == pytest.approx(a.delta_r, abs=1e-9)


def test_assess_correlation_methods_run():
    right, left = synth_traces(alpha=0.5, noise=0.1, seed=8)
    for kind in ("pearson", "spearman", "kendall"):
        score = assess_case(right, left, kind, "none")
        assert 0.0 <= score.value <= 2.0
        assert score.method == kind
