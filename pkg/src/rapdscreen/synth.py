"""Ground-truthed synthetic swinging-flashlight test cases.

Both pupils are perfectly yoked (consensual response): during stimulation
of eye s they relax toward baseline - gain_s * amplitude with a first-order
time constant, and back toward baseline otherwise. A gain below 1 on one
eye models an afferent defect; the asymmetry is only visible in the
per-stimulation-window amplitudes, exactly like the clinical test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ParameterError
from .image import GrayImage
from .reflex import ReflexTrace, StimInterval, assess_case

__all__ = [
    "SimParams",
    "TestCase",
    "build_schedule",
    "radius_schedule",
    "jitter_offset",
    "render_eye_frame",
    "saturation_factor",
    "analytic_case_index",
    "generate_case",
]

SCLERA_INTENSITY = 200.0
IRIS_INTENSITY = 120.0
PUPIL_INTENSITY = 30.0
IRIS_RADIUS_FACTOR = 2.2  # iris outer radius relative to baseline pupil radius


@dataclass(frozen=True)
class SimParams:
    fps: float = 10.0
    swings: int = 3
    on_duration: float = 2.0  # seconds each eye is lit per swing
    rest: float = 1.0  # seconds between stimulations
    frame_size: tuple[int, int] = (160, 120)  # (width, height)
    baseline_radius: float = 25.0
    constriction_amplitude: float = 10.0
    gain_right: float = 1.0
    gain_left: float = 1.0
    time_constant: float = 0.3
    noise_sigma: float = 5.0
    center_jitter: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.fps <= 0 or self.swings < 1 or self.on_duration <= 0 or self.rest < 0:
            raise ParameterError("invalid timing parameters")
        if not (0 < self.gain_right <= 1.0 and 0 < self.gain_left <= 1.0):
            raise ParameterError("afferent gains must be in (0, 1]")
        if self.baseline_radius - self.constriction_amplitude < 6.0:
            raise ParameterError("constricted radius must stay measurable (>= 6 px)")
        if self.time_constant <= 0:
            raise ParameterError("time constant must be positive")

    def gain(self, eye: str) -> float:
        return self.gain_right if eye == "right" else self.gain_left


@dataclass(frozen=True, eq=False)
class TestCase:
    case_id: str
    right_frames: list[GrayImage]
    left_frames: list[GrayImage]
    schedule: tuple[StimInterval, ...]
    ground_truth: dict  # per eye: (n, 3) arrays of (x, y, radius)
    label: str  # rapd_positive | no_rapd
    affected_eye: Optional[str]
    alpha: Optional[float]
    analytic_index: float
    params: SimParams


def build_schedule(p: SimParams) -> tuple[int, tuple[StimInterval, ...]]:
    """Alternating right/left stimulation, `swings` repetitions, with an
    initial rest and a rest after every stimulation."""
    on = int(round(p.on_duration * p.fps))
    rest = int(round(p.rest * p.fps))
    intervals = []
    t = rest
    for _ in range(p.swings):
        for eye in ("right", "left"):
            intervals.append(StimInterval(eye, t, t + on))
            t += on + rest
    return t, tuple(intervals)


def _stim_eye_per_frame(n_frames: int, schedule: tuple[StimInterval, ...]) -> list[Optional[str]]:
    state: list[Optional[str]] = [None] * n_frames
    for iv in schedule:
        for t in range(iv.start_frame, iv.end_frame):
            state[t] = iv.eye_stimulated
    return state


def radius_schedule(p: SimParams, eye: str) -> np.ndarray:
    """Noise-free per-frame pupil radius for one eye.

    The consensual model makes the target radius depend only on which eye
    is stimulated, so both eyes share one schedule; the eye argument keeps
    the interface explicit.

    One unrecorded warm-up swing precedes the recorded frames, so every
    recorded stimulation window sits in the periodic steady state: healthy
    cases then score exactly zero and swapping the affected eye mirrors
    the window statistics exactly."""
    if eye not in ("right", "left"):
        raise ParameterError(f"unknown eye {eye!r}")
    n_frames, schedule = build_schedule(p)
    on = int(round(p.on_duration * p.fps))
    rest = int(round(p.rest * p.fps))
    warm = rest + on + rest + on  # initial rest + warm-up right/left windows
    stim: list[Optional[str]] = [None] * (warm + n_frames)
    stim[rest : rest + on] = ["right"] * on
    stim[rest + on + rest : rest + on + rest + on] = ["left"] * on
    for iv in schedule:
        for t in range(iv.start_frame, iv.end_frame):
            stim[warm + t] = iv.eye_stimulated
    k = 1.0 - math.exp(-1.0 / (p.fps * p.time_constant))
    r0 = p.baseline_radius
    radii = np.empty(warm + n_frames)
    value = r0
    for t in range(warm + n_frames):
        target = r0 if stim[t] is None else r0 - p.gain(stim[t]) * p.constriction_amplitude
        value += (target - value) * k
        radii[t] = value
    return radii[warm:]


def jitter_offset(p: SimParams, frame_seed: int) -> tuple[float, float]:
    """Seeded per-frame center jitter, magnitude at most center_jitter."""
    rng = np.random.default_rng(np.random.SeedSequence([int(frame_seed), 0]))
    dx, dy = rng.uniform(-p.center_jitter, p.center_jitter, size=2)
    return float(dx), float(dy)


_GRID_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _pixel_grid(w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    if (w, h) not in _GRID_CACHE:
        ys, xs = np.mgrid[0:h, 0:w]
        _GRID_CACHE[(w, h)] = (xs.astype(np.float64), ys.astype(np.float64))
    return _GRID_CACHE[(w, h)]


def render_eye_frame(center: tuple[float, float], radius: float, p: SimParams,
                     frame_seed: int) -> GrayImage:
    """Bright sclera field, annular iris, dark anti-aliased pupil disk,
    seeded Gaussian noise and center jitter."""
    if radius <= 0:
        raise ParameterError(f"pupil radius must be positive, got {radius}")
    w, h = p.frame_size
    dx, dy = jitter_offset(p, frame_seed)
    cx, cy = center[0] + dx, center[1] + dy
    if not (radius + 1 <= cx <= w - radius - 2 and radius + 1 <= cy <= h - radius - 2):
        raise ParameterError(f"pupil circle at ({cx:.1f}, {cy:.1f}) r={radius} leaves the frame")
    xs, ys = _pixel_grid(w, h)
    dist = np.hypot(xs - cx, ys - cy)
    iris_cover = np.clip(IRIS_RADIUS_FACTOR * p.baseline_radius + 0.5 - dist, 0.0, 1.0)
    pupil_cover = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    field = SCLERA_INTENSITY * (1 - iris_cover) + IRIS_INTENSITY * iris_cover
    field = field * (1 - pupil_cover) + PUPIL_INTENSITY * pupil_cover
    if p.noise_sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence([int(frame_seed), 1]))
        field = field + rng.normal(0.0, p.noise_sigma, size=field.shape)
    return GrayImage.from_array(field)


def _frame_seed(p: SimParams, eye: str, index: int) -> int:
    eye_tag = 1 if eye == "right" else 2
    return int(np.random.SeedSequence([p.seed, eye_tag, index]).generate_state(1)[0])


def saturation_factor(p: SimParams) -> float:
    return 1.0 - math.exp(-p.on_duration / p.time_constant)


def analytic_case_index(p: SimParams) -> float:
    """Expected dissimilarity index for these parameters, derived from the
    noise-free radius schedules through the standard assessment path
    (median + moving-average smoothing, windowed amplitudes).

    For long stimulations and full inter-window recovery this approaches
    1 - alpha; the deterministic schedule-level value also carries the
    saturation, carryover, and smoothing corrections of the model, which
    is what an end-to-end measurement should be compared against.
    """
    _, schedule = build_schedule(p)
    right = ReflexTrace("right", p.fps, radius_schedule(p, "right"), schedule)
    left = ReflexTrace("left", p.fps, radius_schedule(p, "left"), schedule)
    return assess_case(right, left, "rapd_index", "mov_avg").value


def generate_case(p: SimParams, label: str, affected_eye: Optional[str] = None,
                  alpha: Optional[float] = None, case_id: str = "case") -> TestCase:
    """Build one complete test case with rendered frames and ground truth."""
    if label == "no_rapd":
        if alpha is not None or affected_eye is not None:
            raise ParameterError("healthy cases take no affected eye or alpha")
        p = replace(p, gain_right=1.0, gain_left=1.0)
    elif label == "rapd_positive":
        if affected_eye not in ("right", "left"):
            raise ParameterError(f"affected_eye must be right or left, got {affected_eye!r}")
        if alpha is None or not (0 < alpha < 1):
            raise ParameterError(f"alpha must be in (0, 1) for positive cases, got {alpha}")
        gains = {"right": 1.0, "left": 1.0}
        gains[affected_eye] = alpha
        p = replace(p, gain_right=gains["right"], gain_left=gains["left"])
    else:
        raise ParameterError(f"unknown label {label!r}")
    analytic = analytic_case_index(p)

    n_frames, schedule = build_schedule(p)
    w, h = p.frame_size
    base_center = ((w - 1) / 2.0, (h - 1) / 2.0)
    frames: dict[str, list[GrayImage]] = {}
    truth: dict[str, np.ndarray] = {}
    for eye in ("right", "left"):
        radii = radius_schedule(p, eye)
        eye_frames = []
        gt = np.empty((n_frames, 3))
        for t in range(n_frames):
            seed = _frame_seed(p, eye, t)
            dx, dy = jitter_offset(p, seed)
            eye_frames.append(render_eye_frame(base_center, radii[t], p, seed))
            gt[t] = (base_center[0] + dx, base_center[1] + dy, radii[t])
        frames[eye] = eye_frames
        truth[eye] = gt

    return TestCase(
        case_id=case_id,
        right_frames=frames["right"],
        left_frames=frames["left"],
        schedule=schedule,
        ground_truth=truth,
        label=label,
        affected_eye=affected_eye,
        alpha=alpha,
        analytic_index=analytic,
        params=p,
    )
