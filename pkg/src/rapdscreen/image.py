"""Grayscale image container and preprocessing primitives.

All operations are pure: inputs are never mutated and identical inputs
produce bit-identical outputs. Images stay 8-bit at operation boundaries;
intermediate arithmetic runs in floating point. Borders are handled by
edge replication throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError

__all__ = [
    "GrayImage",
    "GradientField",
    "EdgeMap",
    "gaussian_blur",
    "sobel_gradients",
    "canny",
    "normalize_intensity",
    "morph",
    "crop_patch",
    "resize_bilinear",
    "image_mean",
    "read_pgm",
    "write_pgm",
]


def _to_u8(values: np.ndarray) -> np.ndarray:
    """Round-half-up to the nearest intensity and clip to [0, 255]."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel raster, row-major, at least 1x1."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ParameterError(f"expected a 2-D pixel array, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"image must be at least 1x1, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ParameterError(f"pixels must be uint8, got {arr.dtype}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @classmethod
    def from_array(cls, values: np.ndarray) -> "GrayImage":
        """Build an image from any numeric array, rounding and clipping."""
        return cls(_to_u8(np.asarray(values, dtype=np.float64)))

    def astype_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Signed horizontal/vertical derivatives and their L2 magnitude."""

    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Per-pixel boolean edge flags with the source image's dimensions."""

    bits: np.ndarray

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


_KERNEL_CACHE: dict[float, np.ndarray] = {}


def _gaussian_kernel(sigma: float) -> np.ndarray:
    if sigma not in _KERNEL_CACHE:
        radius = math.ceil(3.0 * sigma)
        xs = np.arange(-radius, radius + 1, dtype=np.float64)
        kernel = np.exp(-(xs**2) / (2.0 * sigma * sigma))
        _KERNEL_CACHE[sigma] = kernel / kernel.sum()
    return _KERNEL_CACHE[sigma]


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian smoothing, kernel radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    kernel = _gaussian_kernel(sigma)
    out = img.astype_float()
    out = ndimage.correlate1d(out, kernel, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="nearest")
    return GrayImage(_to_u8(out))


def sobel_gradients(img: GrayImage) -> GradientField:
    """3x3 Sobel derivatives with edge-replicated borders.

    gx is positive where intensity increases to the right, gy where it
    increases downward. Values are unscaled kernel responses (a full
    0-to-255 step yields magnitude 1020).
    """
    if img.width < 3 or img.height < 3:
        raise ParameterError(f"image must be at least 3x3, got {img.shape}")
    f = np.pad(img.astype_float(), 1, mode="edge")
    rows = f[:-2] + 2.0 * f[1:-1] + f[2:]  # [1,2,1] down the columns
    gx = rows[:, 2:] - rows[:, :-2]
    cols = f[:, :-2] + 2.0 * f[:, 1:-1] + f[:, 2:]
    gy = cols[2:] - cols[:-2]
    return GradientField(gx=gx, gy=gy, magnitude=np.hypot(gx, gy))


_TAN_22_5 = math.tan(math.pi / 8.0)


def _nonmax_suppress(grad: GradientField) -> np.ndarray:
    """Keep gradient magnitudes that are maximal along the quantized
    gradient direction (4 bins of 45 degrees); zero elsewhere."""
    mag = grad.magnitude
    h, w = mag.shape
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = mag

    # quantize direction by slope comparison instead of arctan2:
    # bin 0 = E/W, bin 2 = N/S, diagonals split by the gradient sign
    ax = np.abs(grad.gx)
    ay = np.abs(grad.gy)
    horizontal = ay <= _TAN_22_5 * ax
    vertical = ax < _TAN_22_5 * ay
    diag_main = ~horizontal & ~vertical & (grad.gx * grad.gy >= 0)  # SE/NW
    diag_anti = ~horizontal & ~vertical & (grad.gx * grad.gy < 0)  # SW/NE

    east = padded[1:-1, 2:]
    west = padded[1:-1, :-2]
    south = padded[2:, 1:-1]
    north = padded[:-2, 1:-1]
    se = padded[2:, 2:]
    nw = padded[:-2, :-2]
    sw = padded[2:, :-2]
    ne = padded[:-2, 2:]

    keep = horizontal & (mag >= east) & (mag >= west)
    keep |= diag_main & (mag >= se) & (mag >= nw)
    keep |= vertical & (mag >= south) & (mag >= north)
    keep |= diag_anti & (mag >= sw) & (mag >= ne)
    return np.where(keep, mag, 0.0)


_CONN8 = np.ones((3, 3), dtype=bool)


def _hysteresis(nms_mag: np.ndarray, low: float, high: float, support=None) -> np.ndarray:
    """Double-threshold hysteresis with 8-connectivity.

    `support`, when given, masks out pixels whose source image is locally
    constant, so every surviving edge bit has nonzero gradient in the source.
    """
    weak = (nms_mag >= low) & (nms_mag > 0.0)
    if support is not None:
        weak &= support
    strong = weak & (nms_mag >= high)
    if not strong.any():
        return np.zeros_like(weak)
    labels, count = ndimage.label(weak, structure=_CONN8)
    keep = np.zeros(count + 1, dtype=bool)
    keep[labels[strong]] = True
    keep[0] = False
    return keep[labels]


def canny(img: GrayImage, low_thr: float, high_thr: float, sigma: float = 1.0) -> EdgeMap:
    """Canny edges: Gaussian presmooth, Sobel, 4-bin non-maximum
    suppression, double-threshold hysteresis (8-connectivity).

    Thresholds apply to the raw Sobel magnitude of the presmoothed image.
    """
    if not (0 <= low_thr <= high_thr <= 255):
        raise ParameterError(f"need 0 <= low <= high <= 255, got ({low_thr}, {high_thr})")
    grad = sobel_gradients(gaussian_blur(img, sigma))
    nms = _nonmax_suppress(grad)
    support = sobel_gradients(img).magnitude > 0.0
    return EdgeMap(bits=_hysteresis(nms, low_thr, high_thr, support))


def normalize_intensity(img: GrayImage) -> GrayImage:
    """Linear min-max stretch to [0, 255]; constant images pass through."""
    lo = int(img.pixels.min())
    hi = int(img.pixels.max())
    if lo == hi:
        return img
    stretched = (img.astype_float() - lo) * (255.0 / (hi - lo))
    return GrayImage(_to_u8(stretched))


def _window_extremum(pixels: np.ndarray, radius: int, take_min: bool) -> np.ndarray:
    side = 2 * radius + 1
    padded = np.pad(pixels, radius, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (side, side))
    return windows.min(axis=(2, 3)) if take_min else windows.max(axis=(2, 3))


def morph(img: GrayImage, kind: str, radius: int) -> GrayImage:
    """Grayscale open/close with a square structuring element of side
    2*radius+1, edge-replicated borders."""
    if radius < 1:
        raise ParameterError(f"radius must be >= 1, got {radius}")
    if kind == "open":
        eroded = _window_extremum(img.pixels, radius, take_min=True)
        return GrayImage(_window_extremum(eroded, radius, take_min=False).astype(np.uint8))
    if kind == "close":
        dilated = _window_extremum(img.pixels, radius, take_min=False)
        return GrayImage(_window_extremum(dilated, radius, take_min=True).astype(np.uint8))
    raise ParameterError(f"kind must be 'open' or 'close', got {kind!r}")


def _crop_window(img: GrayImage, center: tuple[float, float], size: tuple[int, int]) -> tuple[int, int, int, int]:
    """Clamped (ox, oy, w, h) of the window centered at `center`."""
    w, h = size
    if w < 1 or h < 1:
        raise ParameterError(f"size must be at least 1x1, got {size}")
    w = min(w, img.width)
    h = min(h, img.height)
    cx = int(math.floor(center[0] + 0.5))
    cy = int(math.floor(center[1] + 0.5))
    ox = min(max(cx - w // 2, 0), img.width - w)
    oy = min(max(cy - h // 2, 0), img.height - h)
    return ox, oy, w, h


def crop_patch(img: GrayImage, center: tuple[float, float], size: tuple[int, int]) -> GrayImage:
    """Window of the requested size centered at `center`, shifted to stay
    inside the image. Axes larger than the image collapse to full extent."""
    ox, oy, w, h = _crop_window(img, center, size)
    return GrayImage(img.pixels[oy : oy + h, ox : ox + w])


def _sample_positions(dst: int, src: int) -> np.ndarray:
    if dst == 1:
        return np.array([(src - 1) / 2.0])
    return np.arange(dst, dtype=np.float64) * ((src - 1) / (dst - 1))


def resize_bilinear(img: GrayImage, w: int, h: int) -> GrayImage:
    """Bilinear resample with corner-aligned sampling."""
    if w < 1 or h < 1:
        raise ParameterError(f"target size must be at least 1x1, got {(w, h)}")
    if w == img.width and h == img.height:
        return img
    xs = _sample_positions(w, img.width)
    ys = _sample_positions(h, img.height)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, img.width - 1)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, img.height - 1)
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)
    fx = (xs - x0)[None, :]
    fy = (ys - y0)[:, None]
    f = img.astype_float()
    top = f[np.ix_(y0, x0)] * (1 - fx) + f[np.ix_(y0, x1)] * fx
    bottom = f[np.ix_(y1, x0)] * (1 - fx) + f[np.ix_(y1, x1)] * fx
    return GrayImage(_to_u8(top * (1 - fy) + bottom * fy))


def image_mean(img: GrayImage) -> float:
    """Arithmetic mean of all pixel intensities."""
    return float(img.pixels.mean())


def read_pgm(path) -> GrayImage:
    """Read a binary PGM (P5, maxval 255)."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise ParameterError(f"truncated PGM header in {path}")
        ch = data[pos : pos + 1]
        if ch == b"#":
            pos = data.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    if fields[0] != b"P5":
        raise ParameterError(f"not a binary PGM (P5): {path}")
    width, height, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise ParameterError(f"unsupported PGM maxval {maxval} in {path}")
    pos += 1  # single whitespace after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return GrayImage(raster.reshape(height, width))


def write_pgm(img: GrayImage, path) -> None:
    """Write a binary PGM (P5, maxval 255)."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())
