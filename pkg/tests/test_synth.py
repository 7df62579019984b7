import math

import numpy as np
import pytest

from rapdscreen import ParameterError
from rapdscreen.reflex import ReflexTrace, assess_case
from rapdscreen.synth import (
    SimParams,
    analytic_case_index,
    build_schedule,
    generate_case,
    radius_schedule,
    render_eye_frame,
    saturation_factor,
)


def test_schedule_alternates_and_counts():
    p = SimParams()
    n, schedule = build_schedule(p)
    assert len(schedule) == 2 * p.swings
    assert [iv.eye_stimulated for iv in schedule] == ["right", "left"] * p.swings
    assert n == schedule[-1].end_frame + int(round(p.rest * p.fps))
    for a, b in zip(schedule, schedule[1:]):
        assert b.start_frame >= a.end_frame


# --- radius_schedule --------------------------------------------------------------


def test_healthy_schedules_identical():
    p = SimParams()
    assert np.array_equal(radius_schedule(p, "right"), radius_schedule(p, "left"))


def test_consensual_constriction_depths():
    p = SimParams(gain_right=0.4)
    n, schedule = build_schedule(p)
    for eye in ("right", "left"):
        radii = radius_schedule(p, eye)
        for iv in schedule:
            depth = p.baseline_radius - radii[iv.start_frame : iv.end_frame].min()
            expected = (0.4 if iv.eye_stimulated == "right" else 1.0) * p.constriction_amplitude
            assert depth == pytest.approx(expected, abs=0.6)


def test_saturated_window_amplitude_matches_closed_form():
    p = SimParams(on_duration=3.0, rest=3.0, gain_left=0.7)
    n, schedule = build_schedule(p)
    radii = radius_schedule(p, "left")
    sat = saturation_factor(p)
    left_windows = [iv for iv in schedule if iv.eye_stimulated == "left"]
    iv = left_windows[0]
    amplitude = radii[: iv.start_frame].max() - radii[iv.start_frame : iv.end_frame].min()
    assert amplitude == pytest.approx(0.7 * p.constriction_amplitude * sat, rel=0.02)


def test_ground_truth_radii_stay_in_band():
    p = SimParams(gain_left=0.3)
    radii = radius_schedule(p, "left")
    assert radii.min() >= p.baseline_radius - p.constriction_amplitude - 1e-9
    assert radii.max() <= p.baseline_radius + 1e-9
    assert radii.min() >= 5.0 and radii.max() <= 30.0


# --- render_eye_frame --------------------------------------------------------------


def test_render_pupil_area_matches_circle():
    p = SimParams(noise_sigma=0.0, center_jitter=0.0)
    img = render_eye_frame((80, 60), 20.0, p, frame_seed=1)
    dark = (img.pixels < 75).sum()
    assert dark == pytest.approx(math.pi * 400, rel=0.05)


def test_render_same_seed_identical():
    p = SimParams()
    a = render_eye_frame((80, 60), 18.0, p, frame_seed=42)
    b = render_eye_frame((80, 60), 18.0, p, frame_seed=42)
    assert np.array_equal(a.pixels, b.pixels)
    c = render_eye_frame((80, 60), 18.0, p, frame_seed=43)
    assert not np.array_equal(a.pixels, c.pixels)


def test_render_rejects_degenerate_radius():
    with pytest.raises(ParameterError):
        render_eye_frame((80, 60), 0.0, SimParams(), frame_seed=0)


def test_render_rejects_out_of_bounds_circle():
    with pytest.raises(ParameterError):
        render_eye_frame((5, 5), 20.0, SimParams(center_jitter=0.0), frame_seed=0)


# --- generate_case ------------------------------------------------------------------


def test_healthy_case_analytic_index_zero():
    case = generate_case(SimParams(seed=1), "no_rapd", case_id="h1")
    assert case.analytic_index == pytest.approx(0.0, abs=1e-9)
    assert case.label == "no_rapd"
    assert len(case.right_frames) == len(case.left_frames)


def test_rapd_case_analytic_index_tracks_one_minus_alpha():
    """The schedule-level index carries saturation, carryover, and smoothing
    corrections on top of 1 - alpha; with the default dynamics these push it
    up by less than 0.1."""
    p = SimParams(seed=2)
    case = generate_case(p, "rapd_positive", "left", 0.4, case_id="r1")
    assert case.analytic_index == pytest.approx(analytic_case_index(case.params), abs=1e-12)
    assert 0.0 <= case.analytic_index - 0.6 <= 0.1


def test_case_determinism():
    a = generate_case(SimParams(seed=9), "rapd_positive", "right", 0.5, case_id="x")
    b = generate_case(SimParams(seed=9), "rapd_positive", "right", 0.5, case_id="x")
    for fa, fb in zip(a.right_frames + a.left_frames, b.right_frames + b.left_frames):
        assert np.array_equal(fa.pixels, fb.pixels)
    assert np.array_equal(a.ground_truth["right"], b.ground_truth["right"])


def test_case_label_parameter_validation():
    p = SimParams()
    with pytest.raises(ParameterError):
        generate_case(p, "rapd_positive", "left", 1.5)
    with pytest.raises(ParameterError):
        generate_case(p, "rapd_positive", None, 0.5)
    with pytest.raises(ParameterError):
        generate_case(p, "no_rapd", "left", 0.5)
    with pytest.raises(ParameterError):
        generate_case(p, "maybe")


def test_affected_eye_mirror_symmetry():
    left_case = generate_case(SimParams(seed=4), "rapd_positive", "left", 0.3, case_id="l")
    right_case = generate_case(SimParams(seed=4), "rapd_positive", "right", 0.3, case_id="r")
    p_left = left_case.params
    p_right = right_case.params
    # mirrored gains produce mirrored window depths
    assert p_left.gain_left == p_right.gain_right == 0.3
    assert p_left.gain_right == p_right.gain_left == 1.0
    assert left_case.analytic_index == pytest.approx(right_case.analytic_index, abs=1e-9)


def test_ground_truth_jitter_matches_frames():
    """The recorded center is the jittered one actually rendered."""
    p = SimParams(seed=11, noise_sigma=0.0, center_jitter=2.0)
    case = generate_case(p, "no_rapd", case_id="j")
    img = case.right_frames[0]
    cx, cy, r = case.ground_truth["right"][0]
    ys, xs = np.mgrid[0 : img.height, 0 : img.width]
    dark = img.pixels < 75
    assert abs(xs[dark].mean() - cx) <= 0.5
    assert abs(ys[dark].mean() - cy) <= 0.5


def test_full_pipeline_recovers_analytic_index_noise_free():
    from rapdscreen.localize import starburst_localize
    from rapdscreen.sizing import CropConfig, HoughConfig, measure_sequence

    p = SimParams(seed=6, noise_sigma=0.0, center_jitter=1.0)
    case = generate_case(p, "rapd_positive", "left", 0.4, case_id="p")
    traces = {}
    for eye, frames in (("right", case.right_frames), ("left", case.left_frames)):
        traces[eye] = measure_sequence(
            frames, starburst_localize, CropConfig("half_image"), HoughConfig(),
            eye=eye, fps=p.fps, schedule=case.schedule,
        )
    score = assess_case(traces["right"], traces["left"], "rapd_index", "mov_avg")
    assert score.value == pytest.approx(case.analytic_index, abs=0.05)
