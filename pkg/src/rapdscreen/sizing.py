"""Circular-Hough pupil sizing (gradient method) with an automated
dual-threshold sweep, applied to crops around the localized pupil center.

Edge pixels vote along their gradient line, in both directions, for center
candidates at distances [r_min, r_max]; the radius is the mode of rounded
edge-to-center distances. The automated sweep walks the accumulator
threshold down in the outer loop and the Canny threshold down to the image
mean in the inner loop, returning the first detection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    LocalizationError,
    MeasurementError,
    ParameterError,
    TraceUnusableError,
)
from .image import (
    GrayImage,
    _crop_window,
    _hysteresis,
    _nonmax_suppress,
    gaussian_blur,
    image_mean,
    sobel_gradients,
)
from .localize import PupilFit
from .reflex import ReflexTrace, StimInterval

__all__ = [
    "Circle",
    "HoughConfig",
    "CropConfig",
    "FrameMeasurement",
    "hough_circle",
    "auto_hough",
    "measure_frames",
    "assemble_trace",
    "measure_sequence",
]

HD_WIDTH_THRESHOLD = 960  # frames wider than this get box-downsampled by 4
HD_DOWNSAMPLE = 4


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float
    votes: int


@dataclass(frozen=True)
class HoughConfig:
    r_min: int = 5
    r_max: int = 30
    canny_max: float = 255.0
    canny_step: float = 10.0
    acc_max: int = 100
    acc_min: int = 10
    acc_step: int = 5
    sigma: float = 1.0

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise ParameterError(f"need 0 < r_min < r_max, got ({self.r_min}, {self.r_max})")
        if self.canny_step <= 0 or self.acc_step <= 0:
            raise ParameterError("sweep steps must be positive")


@dataclass(frozen=True)
class CropConfig:
    """Crop placed around the localized center: 'half_image' uses half the
    frame dimensions, 'fixed_60' a 60x60 window."""

    mode: str = "half_image"

    def __post_init__(self):
        if self.mode not in ("half_image", "fixed_60"):
            raise ParameterError(f"unknown crop mode {self.mode!r}")

    def size_for(self, img: GrayImage) -> tuple[int, int]:
        if self.mode == "fixed_60":
            return (60, 60)
        return (max(img.width // 2, 1), max(img.height // 2, 1))


@dataclass(frozen=True)
class FrameMeasurement:
    frame_index: int
    x: Optional[float]
    y: Optional[float]
    radius: Optional[float]
    votes: Optional[int]
    status: str  # ok | localization_failed | measurement_failed


class _HoughWorkspace:
    """Cached per-image pipeline state: the blur/Sobel/NMS stages do not
    depend on the swept thresholds, each Canny level's best candidate does
    not depend on the accumulator threshold, and adjacent levels that
    produce identical edge sets share one vote pass."""

    def __init__(self, img: GrayImage, cfg: HoughConfig):
        if img.width < 2 * cfg.r_min or img.height < 2 * cfg.r_min:
            raise ParameterError(f"image {img.shape} too small for r_min {cfg.r_min}")
        self.cfg = cfg
        self.shape = img.shape
        self.grad = sobel_gradients(gaussian_blur(img, cfg.sigma))
        self.nms = _nonmax_suppress(self.grad)
        self.nms_max = float(self.nms.max())
        self._levels: dict[float, Optional[tuple[int, tuple[int, int], float]]] = {}
        self._by_edge_set: dict[bytes, Optional[tuple[int, tuple[int, int], float]]] = {}

    def detect(self, canny_thr: float) -> Optional[tuple[int, tuple[int, int], float]]:
        """Best-voted candidate (votes, center, radius) at one Canny level."""
        if canny_thr in self._levels:
            return self._levels[canny_thr]
        if self.nms_max < canny_thr:
            result = None
        else:
            bits = _hysteresis(self.nms, canny_thr / 2.0, canny_thr)
            key = bits.tobytes()
            if key in self._by_edge_set:
                result = self._by_edge_set[key]
            else:
                result = self._vote(bits)
                self._by_edge_set[key] = result
        self._levels[canny_thr] = result
        return result

    def _vote(self, bits: np.ndarray) -> Optional[tuple[int, tuple[int, int], float]]:
        ys, xs = np.nonzero(bits)
        if len(xs) == 0:
            return None
        gx = self.grad.gx[ys, xs]
        gy = self.grad.gy[ys, xs]
        mag = np.hypot(gx, gy)
        ok = mag > 0
        xs_v, ys_v = xs[ok], ys[ok]
        ux, uy = gx[ok] / mag[ok], gy[ok] / mag[ok]

        h, w = self.shape
        cfg = self.cfg
        radii = np.arange(cfg.r_min, cfg.r_max + 1, dtype=np.float64)
        steps_x = radii[None, :] * ux[:, None]
        steps_y = radii[None, :] * uy[:, None]
        cx = np.rint(np.concatenate([xs_v[:, None] + steps_x, xs_v[:, None] - steps_x], axis=0)).astype(np.int64).ravel()
        cy = np.rint(np.concatenate([ys_v[:, None] + steps_y, ys_v[:, None] - steps_y], axis=0)).astype(np.int64).ravel()
        inside = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        acc = np.bincount(cy[inside] * w + cx[inside], minlength=h * w)

        best = int(acc.argmax())
        votes = int(acc[best])
        if votes <= 0:
            return None
        by, bx = divmod(best, w)
        dist = np.rint(np.hypot(xs - bx, ys - by)).astype(np.int64)
        in_range = (dist >= cfg.r_min) & (dist <= cfg.r_max)
        if not in_range.any():
            return None
        radius = int(np.bincount(dist[in_range]).argmax())
        return votes, (bx, by), float(radius)

    def canny_levels(self, floor: float):
        level = self.cfg.canny_max
        while level >= floor:
            yield level
            level -= self.cfg.canny_step


def hough_circle(img: GrayImage, cfg: HoughConfig, canny_thr: float, acc_thr: int) -> Optional[Circle]:
    """Single Hough query at fixed thresholds; absence is a value."""
    ws = _HoughWorkspace(img, cfg)
    found = ws.detect(canny_thr)
    if found is None or found[0] < acc_thr:
        return None
    votes, center, radius = found
    return Circle(center=(float(center[0]), float(center[1])), radius=radius, votes=votes)


def auto_hough(img: GrayImage, cfg: HoughConfig = HoughConfig()) -> Circle:
    """Nested downward sweep (accumulator outer, Canny inner, Canny floor at
    the image mean); the first detection wins."""
    ws = _HoughWorkspace(img, cfg)
    floor = image_mean(img)
    for acc_thr in range(cfg.acc_max, cfg.acc_min - 1, -cfg.acc_step):
        for canny_thr in ws.canny_levels(floor):
            found = ws.detect(canny_thr)
            if found is not None and found[0] >= acc_thr:
                votes, center, radius = found
                return Circle(center=(float(center[0]), float(center[1])), radius=radius, votes=votes)
    raise MeasurementError("threshold sweep exhausted without a circle")


def _box_downsample(img: GrayImage, factor: int) -> GrayImage:
    if factor == 1:
        return img
    h = (img.height // factor) * factor
    w = (img.width // factor) * factor
    blocks = img.pixels[:h, :w].astype(np.float64)
    blocks = blocks.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))
    return GrayImage.from_array(blocks)


def _resolve_downsample(img: GrayImage, downsample) -> int:
    if downsample == "auto":
        return HD_DOWNSAMPLE if img.width > HD_WIDTH_THRESHOLD else 1
    factor = int(downsample)
    if factor < 1:
        raise ParameterError(f"downsample factor must be >= 1, got {downsample}")
    return factor


def measure_frames(
    frames: Sequence[GrayImage],
    localizer: Callable[[GrayImage], PupilFit],
    crop: CropConfig = CropConfig(),
    cfg: HoughConfig = HoughConfig(),
    downsample="auto",
) -> list[FrameMeasurement]:
    """Per-frame localization + sizing; failures become gap records.
    Coordinates and radii are in downsampled-pixel units."""
    if not frames:
        raise ParameterError("no frames to measure")
    out: list[FrameMeasurement] = []
    for index, frame in enumerate(frames):
        work = _box_downsample(frame, _resolve_downsample(frame, downsample))
        try:
            fit = localizer(work)
        except LocalizationError:
            out.append(FrameMeasurement(index, None, None, None, None, "localization_failed"))
            continue
        ox, oy, w, h = _crop_window(work, fit.center, crop.size_for(work))
        patch = GrayImage(work.pixels[oy : oy + h, ox : ox + w])
        try:
            circle = auto_hough(patch, cfg)
        except (MeasurementError, ParameterError):
            out.append(FrameMeasurement(index, None, None, None, None, "measurement_failed"))
            continue
        out.append(
            FrameMeasurement(
                frame_index=index,
                x=circle.center[0] + ox,
                y=circle.center[1] + oy,
                radius=circle.radius,
                votes=circle.votes,
                status="ok",
            )
        )
    return out


def _fill_gaps(radii: list[Optional[float]]) -> np.ndarray:
    valid = np.array([i for i, r in enumerate(radii) if r is not None])
    out = np.empty(len(radii))
    for i, r in enumerate(radii):
        if r is not None:
            out[i] = r
        else:
            # nearest valid frame; ties resolve to the earlier frame
            j = valid[np.abs(valid - i).argmin()]
            out[i] = radii[j]
    return out


def assemble_trace(
    measurements: Sequence[FrameMeasurement],
    eye: str,
    fps: float,
    schedule: Sequence[StimInterval] = (),
) -> ReflexTrace:
    """Gap-fill measured radii by nearest valid neighbor and wrap them in a
    ReflexTrace. More than 50% failed frames is unusable."""
    radii = [m.radius for m in measurements]
    failed = sum(1 for r in radii if r is None)
    if failed * 2 > len(radii):
        raise TraceUnusableError(f"{failed}/{len(radii)} frames failed to measure")
    return ReflexTrace(eye=eye, fps=fps, radii=_fill_gaps(radii), schedule=tuple(schedule))


def measure_sequence(
    frames: Sequence[GrayImage],
    localizer: Callable[[GrayImage], PupilFit],
    crop: CropConfig = CropConfig(),
    cfg: HoughConfig = HoughConfig(),
    *,
    eye: str = "right",
    fps: float = 10.0,
    schedule: Sequence[StimInterval] = (),
    downsample="auto",
) -> ReflexTrace:
    """Measure a frame sequence end to end into a radius trace."""
    return assemble_trace(measure_frames(frames, localizer, crop, cfg, downsample), eye, fps, schedule)
