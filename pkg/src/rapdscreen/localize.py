"""Staged handcrafted pupil localizers: ray casting (starburst), curve
filtering + ellipse fit (excuse), and per-curve ellipse scoring (else).

All three map a grayscale eye frame to a PupilFit. Stage thresholds that
the source methods leave open are fixed module constants, chosen to pass
the synthetic oracle suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ellipse import Ellipse, fit_ellipse_lsq
from .errors import FitError, LocalizationError, ParameterError
from .image import EdgeMap, GrayImage, gaussian_blur, sobel_gradients
from .image import _hysteresis, _nonmax_suppress  # package-internal reuse

__all__ = [
    "PupilFit",
    "CurveSegment",
    "StarburstConfig",
    "extract_curved_segments",
    "starburst_localize",
    "excuse_localize",
    "else_localize",
]

# segment filtering constants (excuse/else stages)
MIN_CHAIN_POINTS = 5
STRAIGHT_LINE_DEVIATION = 2.0  # px: below this a segment is a line
MIN_BBOX_AREA = 25  # px^2: smaller enclosures are rejected
ELSE_AXIS_RATIO_MIN = 0.2
ELSE_RADIUS_RANGE = (5.0, 30.0)
INLIER_RESIDUAL = 2.0  # px: ellipse-fit inlier band for confidence


@dataclass(frozen=True)
class PupilFit:
    """Per-frame pupil estimate in frame pixel coordinates."""

    center: tuple[float, float]
    radius: Optional[float]
    confidence: float
    method: str


@dataclass(frozen=True)
class CurveSegment:
    """Ordered 8-connected chain of edge pixels."""

    points: np.ndarray  # (n, 2) int, columns (x, y)

    @property
    def length(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class StarburstConfig:
    n_rays: int = 36
    gradient_threshold: float = 20.0  # 8-bit units per pixel step
    epsilon: float = 0.5  # px convergence displacement
    max_iters: int = 20
    sigma: float = 1.0  # presmoothing for the gradient field


# --- edge chains -------------------------------------------------------------

_NEIGHBOR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


def extract_curved_segments(edges: EdgeMap) -> list[CurveSegment]:
    """Trace edge pixels into ordered chains, splitting at junction pixels
    (more than two edge neighbors). Chains shorter than 5 are dropped."""
    bits = edges.bits
    if not bits.any():
        return []
    h, w = bits.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits
    degree = np.zeros((h, w), dtype=np.int32)
    for dy, dx in _NEIGHBOR_OFFSETS:
        degree += padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    pruned = np.zeros((h + 2, w + 2), dtype=bool)
    pruned[1:-1, 1:-1] = bits & (degree <= 2)

    stride = w + 2
    flat = bytearray(pruned.tobytes())  # live map; visited pixels are cleared
    offsets = [dy * stride + dx for dy, dx in _NEIGHBOR_OFFSETS]
    segments: list[CurveSegment] = []

    def walk(start: int) -> list[tuple[int, int]]:
        chain = [start]
        flat[start] = 0
        pos = start
        while True:
            for off in offsets:
                nxt = pos + off
                if flat[nxt]:
                    flat[nxt] = 0
                    chain.append(nxt)
                    pos = nxt
                    break
            else:
                return chain

    ys, xs = np.nonzero(pruned)
    # endpoints first so open chains are traced end-to-end, then cycles
    pruned_degree = np.zeros_like(degree)
    for dy, dx in _NEIGHBOR_OFFSETS:
        pruned_degree += pruned[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    endpoint = pruned_degree[ys - 1, xs - 1] <= 1
    order = np.concatenate([np.flatnonzero(endpoint), np.flatnonzero(~endpoint)])
    starts = (ys * stride + xs)[order]
    for start in starts:
        if not flat[start]:
            continue
        chain = walk(int(start))
        if len(chain) >= MIN_CHAIN_POINTS:
            arr = np.asarray(chain, dtype=np.int64)
            points = np.column_stack([arr % stride - 1, arr // stride - 1])
            segments.append(CurveSegment(points=points))
    return segments


# --- shared helpers ----------------------------------------------------------


def _auto_canny_thresholds(magnitude: np.ndarray) -> tuple[float, float]:
    """High threshold at mean + 1 stddev of the gradient magnitude,
    low at half of high."""
    high = min(float(magnitude.mean() + magnitude.std()), 255.0)
    return high / 2.0, high


def _thin_edges(bits: np.ndarray) -> np.ndarray:
    """Remove staircase-corner pixels so chains become single-pixel wide.

    A pixel with both a horizontal and a vertical 4-neighbor is redundant:
    those neighbors stay 8-connected through their shared diagonal.
    Processing in raster order on the live map keeps removal deterministic
    and never disconnects a chain.
    """
    out = bits.copy()
    h, w = out.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = out
    horiz = padded[1:-1, :-2] | padded[1:-1, 2:]
    vert = padded[:-2, 1:-1] | padded[2:, 1:-1]
    for y, x in zip(*np.nonzero(out & horiz & vert)):
        left = x > 0 and out[y, x - 1]
        right = x < w - 1 and out[y, x + 1]
        up = y > 0 and out[y - 1, x]
        down = y < h - 1 and out[y + 1, x]
        if (left or right) and (up or down):
            out[y, x] = False
    return out


def _auto_edges(img: GrayImage, sigma: float = 1.0):
    """Canny pipeline with the automatic threshold pick, thinned for chain
    tracing; returns the edge bits and the presmoothed gradient field."""
    grad = sobel_gradients(gaussian_blur(img, sigma))
    low, high = _auto_canny_thresholds(grad.magnitude)
    nms = _nonmax_suppress(grad)
    bits = _thin_edges(_hysteresis(nms, low, high))
    return bits, grad


def _cast_rays(grad_x: np.ndarray, grad_y: np.ndarray, center: tuple[float, float],
               n_rays: int, threshold: float, max_t: Optional[int] = None) -> np.ndarray:
    """March rays outward from `center`; return the first position on each
    ray where the directional gradient exceeds `threshold` (shape (k, 2))."""
    h, w = grad_x.shape
    cx, cy = center
    angles = np.arange(n_rays) * (2 * np.pi / n_rays)
    cos, sin = np.cos(angles), np.sin(angles)
    reach = int(np.ceil(max(np.hypot(gx - cx, gy - cy) for gx in (0, w - 1) for gy in (0, h - 1))))
    max_t = reach if max_t is None else min(max_t, reach)
    ts = np.arange(1, max_t + 1, dtype=np.float64)
    px = cx + ts[None, :] * cos[:, None]
    py = cy + ts[None, :] * sin[:, None]
    ix = np.floor(px + 0.5).astype(np.int64)
    iy = np.floor(py + 0.5).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    ix_c = np.clip(ix, 0, w - 1)
    iy_c = np.clip(iy, 0, h - 1)
    directional = grad_x[iy_c, ix_c] * cos[:, None] + grad_y[iy_c, ix_c] * sin[:, None]
    hit = (directional > threshold) & inside
    first = hit.argmax(axis=1)
    has_hit = hit[np.arange(n_rays), first]
    rows = np.flatnonzero(has_hit)
    if rows.size == 0:
        return np.empty((0, 2))
    # refine each hit to the directional-gradient peak of its run, so the
    # feature sits on the boundary ridge rather than the ramp's foot
    steps = np.arange(len(ts))
    after = steps[None, :] >= first[:, None]
    stop = ~hit & after
    run_end = np.where(stop.any(axis=1), stop.argmax(axis=1), len(ts))
    in_run = after & (steps[None, :] < run_end[:, None])
    peak = np.where(in_run, directional, -np.inf).argmax(axis=1)
    return np.column_stack([px[rows, peak[rows]], py[rows, peak[rows]]])


def _require_min_size(img: GrayImage) -> None:
    if img.width < 32 or img.height < 32:
        raise ParameterError(f"localizers need at least 32x32 input, got {img.shape}")


def _clamp_inside(center: tuple[float, float], img: GrayImage) -> tuple[float, float]:
    return (
        float(min(max(center[0], 0.0), img.width - 1)),
        float(min(max(center[1], 0.0), img.height - 1)),
    )


# --- starburst ---------------------------------------------------------------


def starburst_localize(img: GrayImage, cfg: StarburstConfig = StarburstConfig()) -> PupilFit:
    """Iterative ray-casting localizer seeded at the image center."""
    _require_min_size(img)
    grad = sobel_gradients(gaussian_blur(img, cfg.sigma))
    # scale to per-pixel intensity-step units (full 8-bit step -> 255)
    gx = grad.gx / 4.0
    gy = grad.gy / 4.0
    center = ((img.width - 1) / 2.0, (img.height - 1) / 2.0)
    features = np.empty((0, 2))
    for _ in range(cfg.max_iters):
        features = _cast_rays(gx, gy, center, cfg.n_rays, cfg.gradient_threshold)
        if len(features) == 0:
            raise LocalizationError("starburst: no ray produced a feature point")
        new_center = (float(features[:, 0].mean()), float(features[:, 1].mean()))
        displacement = np.hypot(new_center[0] - center[0], new_center[1] - center[1])
        center = new_center
        if displacement < cfg.epsilon:
            break
    confidence = len(features) / cfg.n_rays
    return PupilFit(center=_clamp_inside(center, img), radius=None,
                    confidence=confidence, method="starburst")


# --- excuse ------------------------------------------------------------------


def _chord_deviation(points: np.ndarray) -> float:
    p0 = points[0].astype(np.float64)
    p1 = points[-1].astype(np.float64)
    chord = p1 - p0
    norm = np.hypot(*chord)
    if norm < 3.0:
        return np.inf  # closed or near-closed curves are never straight lines
    rel = points.astype(np.float64) - p0
    return float(np.abs(rel[:, 0] * chord[1] - rel[:, 1] * chord[0]).max() / norm)


def _bbox_area(points: np.ndarray) -> int:
    spans = points.max(axis=0) - points.min(axis=0) + 1
    return int(spans[0] * spans[1])


def _hull_chain(pts: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """One side of the monotone-chain convex hull of sorted points."""
    out: list[tuple[int, int]] = []
    for p in pts:
        while len(out) >= 2:
            ax, ay = out[-2]
            bx, by = out[-1]
            if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) > 0:
                break
            out.pop()
        out.append(p)
    return out


def _chain_boundary(chain: list[tuple[int, int]], columns: np.ndarray, keep_max: bool) -> np.ndarray:
    """Interpolated y of an x-monotone hull chain at integer columns;
    duplicate-x vertices collapse to the chain's extreme."""
    bound: dict[int, float] = {}
    for x, y in chain:
        if x not in bound:
            bound[x] = y
        else:
            bound[x] = max(bound[x], y) if keep_max else min(bound[x], y)
    xs = np.fromiter(bound.keys(), dtype=np.float64)
    ys = np.fromiter(bound.values(), dtype=np.float64)
    order = np.argsort(xs)
    return np.interp(columns, xs[order], ys[order])


def _hull_interior_mean(pixels_f: np.ndarray, points: np.ndarray) -> float:
    """Mean intensity inside the convex hull of the segment's points,
    filled column by column from the two x-monotone hull chains."""
    pts = sorted({(int(x), int(y)) for x, y in points})
    if len(pts) <= 2:
        return float(pixels_f[points[:, 1], points[:, 0]].mean())
    upper = _hull_chain(pts)  # smaller y side in image coordinates
    lower = _hull_chain(pts[::-1])
    columns = np.arange(pts[0][0], pts[-1][0] + 1)
    y_top = np.ceil(_chain_boundary(upper, columns, keep_max=False)).astype(np.int64)
    y_bot = np.floor(_chain_boundary(lower, columns, keep_max=True)).astype(np.int64)
    total = 0.0
    count = 0
    for x, yt, yb in zip(columns, y_top, y_bot):
        if yb >= yt:
            col = pixels_f[yt : yb + 1, x]
            total += col.sum()
            count += len(col)
    if count == 0:
        return float(pixels_f[points[:, 1], points[:, 0]].mean())
    return total / count


def excuse_localize(img: GrayImage) -> PupilFit:
    """Curve-filtering localizer: canny segments, darkest-enclosure curve,
    ray refinement from the curve centroid, direct ellipse fit."""
    _require_min_size(img)
    bits, grad = _auto_edges(img)
    segments = extract_curved_segments(EdgeMap(bits=bits))
    pixels_f = img.astype_float()

    candidates = []
    for seg in segments:
        if _bbox_area(seg.points) < MIN_BBOX_AREA:
            continue
        if _chord_deviation(seg.points) < STRAIGHT_LINE_DEVIATION:
            continue
        candidates.append((_hull_interior_mean(pixels_f, seg.points), -seg.length, seg))
    if not candidates:
        raise LocalizationError("excuse: no curved segment survived filtering")
    candidates.sort(key=lambda item: (item[0], item[1]))
    selected = candidates[0][2]

    centroid = selected.points.mean(axis=0)
    # refinement rays only need to reach a plausible pupil boundary
    reach = int(3 * ELSE_RADIUS_RANGE[1])
    rays = _cast_rays(grad.gx / 4.0, grad.gy / 4.0, (float(centroid[0]), float(centroid[1])),
                      StarburstConfig.n_rays, StarburstConfig.gradient_threshold, max_t=reach)
    fit_points = rays if len(rays) >= 5 else selected.points.astype(np.float64)
    if len(fit_points) < 5:
        raise LocalizationError("excuse: fewer than 5 fit points")
    try:
        ell = fit_ellipse_lsq(fit_points)
    except FitError as exc:
        raise LocalizationError(f"excuse: ellipse fit failed ({exc})") from exc
    cx, cy = ell.center
    if not (0 <= cx < img.width and 0 <= cy < img.height):
        raise LocalizationError("excuse: fitted center fell outside the frame")
    residuals = ell.radial_residuals(np.asarray(fit_points, dtype=np.float64))
    confidence = float((residuals < INLIER_RESIDUAL).mean())
    radius = float(np.sqrt(ell.semi_axes[0] * ell.semi_axes[1]))
    return PupilFit(center=(cx, cy), radius=radius, confidence=confidence, method="excuse")


# --- else --------------------------------------------------------------------


def _ellipse_interior_mean(pixels_f: np.ndarray, ell: Ellipse) -> Optional[float]:
    h, w = pixels_f.shape
    a = ell.semi_axes[0]
    x0 = max(int(ell.center[0] - a - 1), 0)
    x1 = min(int(ell.center[0] + a + 1), w - 1)
    y0 = max(int(ell.center[1] - a - 1), 0)
    y1 = min(int(ell.center[1] + a + 1), h - 1)
    if x1 < x0 or y1 < y0:
        return None
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    mask = ell.contains(xs, ys)
    if not mask.any():
        return None
    return float(pixels_f[ys[mask], xs[mask]].mean())


def else_localize(img: GrayImage) -> PupilFit:
    """Per-curve ellipse scoring localizer: junction-split chains, a fit per
    chain, score by interior darkness times axis ratio."""
    _require_min_size(img)
    bits, _ = _auto_edges(img)
    segments = extract_curved_segments(EdgeMap(bits=bits))
    pixels_f = img.astype_float()

    best_score = -1.0
    best: Optional[tuple[Ellipse, float]] = None
    for seg in segments:
        try:
            ell = fit_ellipse_lsq(seg.points.astype(np.float64))
        except FitError:
            continue
        cx, cy = ell.center
        if not (0 <= cx < img.width and 0 <= cy < img.height):
            continue
        ratio = ell.axis_ratio
        if ratio < ELSE_AXIS_RATIO_MIN:
            continue
        radius = float(np.sqrt(ell.semi_axes[0] * ell.semi_axes[1]))
        if not (ELSE_RADIUS_RANGE[0] <= radius <= ELSE_RADIUS_RANGE[1]):
            continue
        inner = _ellipse_interior_mean(pixels_f, ell)
        if inner is None:
            continue
        score = (1.0 - inner / 255.0) * ratio
        if score > best_score:
            best_score = score
            best = (ell, radius)
    if best is None:
        raise LocalizationError("else: no candidate ellipse survived scoring")
    ell, radius = best
    confidence = float(min(max(best_score, 0.0), 1.0))
    return PupilFit(center=ell.center, radius=radius, confidence=confidence, method="else")
