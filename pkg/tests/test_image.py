import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rapdscreen import (
    GrayImage,
    ParameterError,
    canny,
    crop_patch,
    gaussian_blur,
    image_mean,
    morph,
    normalize_intensity,
    read_pgm,
    resize_bilinear,
    sobel_gradients,
    write_pgm,
)

rng = np.random.default_rng(20240)


def gray(arr) -> GrayImage:
    return GrayImage(np.asarray(arr, dtype=np.uint8))


def constant(value, h=16, w=16) -> GrayImage:
    return gray(np.full((h, w), value))


small_images = arrays(
    dtype=np.uint8,
    shape=st.tuples(st.integers(3, 12), st.integers(3, 12)),
    elements=st.integers(0, 255),
).map(GrayImage)


# --- brute-force oracles -------------------------------------------------


def conv2d_replicated(pixels: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct 2-D correlation with edge replication (independent oracle)."""
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    padded = np.pad(pixels.astype(np.float64), ((ry, ry), (rx, rx)), mode="edge")
    out = np.zeros(pixels.shape)
    for y in range(pixels.shape[0]):
        for x in range(pixels.shape[1]):
            out[y, x] = (padded[y : y + kh, x : x + kw] * kernel).sum()
    return out


def gaussian_kernel_2d(sigma: float) -> np.ndarray:
    r = math.ceil(3 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k1 = np.exp(-(xs**2) / (2 * sigma * sigma))
    k1 /= k1.sum()
    return np.outer(k1, k1)


SOBEL_GX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_GY = SOBEL_GX.T


# --- gaussian_blur --------------------------------------------------------


def test_blur_preserves_constant():
    out = gaussian_blur(constant(128), 1.5)
    assert (out.pixels == 128).all()


def test_blur_impulse_matches_direct_convolution():
    pixels = np.zeros((9, 9), dtype=np.uint8)
    pixels[4, 4] = 255
    img = gray(pixels)
    expected = conv2d_replicated(pixels, gaussian_kernel_2d(1.0))
    out = gaussian_blur(img, 1.0)
    assert np.array_equal(out.pixels, np.floor(expected + 0.5).astype(np.uint8))
    # center value is 255 * G(0,0) / sum(kernel), rounded
    k = gaussian_kernel_2d(1.0)
    assert out.pixels[4, 4] == int(math.floor(255 * k[3, 3] + 0.5))


def test_blur_larger_sigma_flattens_impulse():
    pixels = np.zeros((15, 15), dtype=np.uint8)
    pixels[7, 7] = 255
    img = gray(pixels)
    narrow = gaussian_blur(img, 0.8).pixels[7, 7]
    wide = gaussian_blur(img, 2.0).pixels[7, 7]
    assert wide < narrow


def test_blur_rejects_nonpositive_sigma():
    with pytest.raises(ParameterError):
        gaussian_blur(constant(10), 0.0)


@settings(max_examples=30, deadline=None)
@given(small_images, st.floats(0.5, 2.5))
def test_blur_matches_direct_convolution(img, sigma):
    expected = conv2d_replicated(img.pixels, gaussian_kernel_2d(sigma))
    out = gaussian_blur(img, sigma)
    assert np.array_equal(out.pixels, np.clip(np.floor(expected + 0.5), 0, 255).astype(np.uint8))


@settings(max_examples=30, deadline=None)
@given(small_images)
def test_blur_preserves_intensity_range(img):
    out = gaussian_blur(img, 1.3)
    assert out.pixels.min() >= img.pixels.min()
    assert out.pixels.max() <= img.pixels.max()


# --- sobel_gradients ------------------------------------------------------


def test_sobel_constant_is_zero():
    field = sobel_gradients(constant(77))
    assert not field.gx.any() and not field.gy.any()


def test_sobel_vertical_step():
    pixels = np.zeros((10, 10), dtype=np.uint8)
    pixels[:, 5:] = 255
    field = sobel_gradients(gray(pixels))
    interior = field.gy[1:-1, 1:-1]
    assert np.abs(interior).max() == 0
    col_peak = np.abs(field.gx).max(axis=0)
    assert col_peak.argmax() in (4, 5)


def test_sobel_matches_direct_convolution():
    pixels = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
    field = sobel_gradients(gray(pixels))
    gx = conv2d_replicated(pixels, SOBEL_GX)
    gy = conv2d_replicated(pixels, SOBEL_GY)
    assert np.allclose(field.gx, gx)
    assert np.allclose(field.gy, gy)
    assert np.allclose(field.magnitude, np.hypot(gx, gy), atol=1e-6)


def test_sobel_rejects_tiny_images():
    with pytest.raises(ParameterError):
        sobel_gradients(constant(0, h=2, w=5))


# --- canny ----------------------------------------------------------------


def disk_image(h, w, cx, cy, r, inside=30, outside=220) -> GrayImage:
    ys, xs = np.mgrid[0:h, 0:w]
    dist = np.hypot(xs - cx, ys - cy)
    cover = np.clip(r + 0.5 - dist, 0.0, 1.0)
    return GrayImage.from_array(outside * (1 - cover) + inside * cover)


def test_canny_constant_is_empty():
    edges = canny(constant(90), 10, 50)
    assert not edges.bits.any()


def test_canny_disk_annulus():
    img = disk_image(64, 64, 31.0, 33.0, 12.0)
    edges = canny(img, 40, 80)
    ys, xs = np.nonzero(edges.bits)
    assert len(xs) > 0
    dist = np.hypot(xs - 31.0, ys - 33.0)
    assert (np.abs(dist - 12.0) <= 2.0).all()
    # coverage: at least 80% of the true perimeter has a nearby edge pixel
    angles = np.linspace(0, 2 * np.pi, 180, endpoint=False)
    px = 31.0 + 12.0 * np.cos(angles)
    py = 33.0 + 12.0 * np.sin(angles)
    covered = sum(
        1 for x, y in zip(px, py) if (np.hypot(xs - x, ys - y) <= 2.0).any()
    )
    assert covered >= 0.8 * len(angles)


def test_canny_high_threshold_255_needs_saturated_gradients():
    pixels = rng.integers(100, 140, size=(16, 16), dtype=np.uint8)
    edges = canny(gray(pixels), 128, 255)
    # no smoothed gradient reaches 255 here, so no seeds survive
    grad = sobel_gradients(gaussian_blur(gray(pixels), 1.0))
    assert grad.magnitude.max() < 255
    assert not edges.bits.any()


def test_canny_rejects_bad_threshold_order():
    with pytest.raises(ParameterError):
        canny(constant(0), 90, 30)


@settings(max_examples=25, deadline=None)
@given(small_images, st.integers(0, 120))
def test_canny_bits_subset_of_low_threshold_support(img, low):
    high = low + 60
    edges = canny(img, low, high)
    pipeline_mag = sobel_gradients(gaussian_blur(img, 1.0)).magnitude
    source_mag = sobel_gradients(img).magnitude
    if edges.bits.any():
        assert (pipeline_mag[edges.bits] >= low).all()
        assert (source_mag[edges.bits] > 0).all()


# --- normalize_intensity ---------------------------------------------------


def test_normalize_stretches_range():
    pixels = np.linspace(50, 150, 64, dtype=np.uint8).reshape(8, 8)
    out = normalize_intensity(gray(pixels))
    assert out.pixels.min() == 0
    assert out.pixels.max() == 255


def test_normalize_constant_unchanged():
    img = constant(77)
    out = normalize_intensity(img)
    assert np.array_equal(out.pixels, img.pixels)


def test_normalize_full_range_is_identity():
    pixels = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
    pixels[0, 0] = 0
    pixels[-1, -1] = 255
    out = normalize_intensity(gray(pixels))
    assert np.array_equal(out.pixels, pixels)


@settings(max_examples=40, deadline=None)
@given(small_images)
def test_normalize_is_idempotent(img):
    once = normalize_intensity(img)
    twice = normalize_intensity(once)
    assert np.array_equal(once.pixels, twice.pixels)


# --- morph ------------------------------------------------------------------


def brute_window_extremum(pixels, radius, take_min):
    h, w = pixels.shape
    out = np.zeros_like(pixels)
    for y in range(h):
        for x in range(w):
            y0, y1 = max(0, y - radius), min(h, y + radius + 1)
            x0, x1 = max(0, x - radius), min(w, x + radius + 1)
            # edge replication means clamped windows equal replicated ones
            win = pixels[y0:y1, x0:x1]
            out[y, x] = win.min() if take_min else win.max()
    return out


def test_morph_constant_unchanged():
    img = constant(123)
    for kind in ("open", "close"):
        assert np.array_equal(morph(img, kind, 1).pixels, img.pixels)


def test_morph_open_removes_single_bright_pixel():
    pixels = np.full((7, 7), 40, dtype=np.uint8)
    pixels[3, 3] = 255
    out = morph(gray(pixels), "open", 1)
    assert out.pixels[3, 3] == 40


def test_morph_open_matches_brute_force():
    pixels = rng.integers(0, 256, size=(5, 5), dtype=np.uint8)
    expected = brute_window_extremum(brute_window_extremum(pixels, 1, True), 1, False)
    out = morph(gray(pixels), "open", 1)
    assert np.array_equal(out.pixels, expected)


@settings(max_examples=30, deadline=None)
@given(small_images, st.sampled_from(["open", "close"]))
def test_morph_preserves_intensity_range(img, kind):
    out = morph(img, kind, 1)
    assert out.pixels.min() >= img.pixels.min()
    assert out.pixels.max() <= img.pixels.max()


def test_morph_rejects_bad_radius():
    with pytest.raises(ParameterError):
        morph(constant(1), "open", 0)


# --- crop_patch --------------------------------------------------------------


def test_crop_centered_window():
    img = constant(0, h=100, w=100)
    out = crop_patch(img, (50, 50), (60, 60))
    assert out.shape == (60, 60)
    # window spans [20, 80) in both axes
    marked = np.zeros((100, 100), dtype=np.uint8)
    marked[20, 20] = 7
    out2 = crop_patch(gray(marked), (50, 50), (60, 60))
    assert out2.pixels[0, 0] == 7


def test_crop_clamps_at_corner():
    marked = np.zeros((100, 100), dtype=np.uint8)
    marked[0, 0] = 9
    marked[59, 59] = 5
    out = crop_patch(gray(marked), (0, 0), (60, 60))
    assert out.shape == (60, 60)
    assert out.pixels[0, 0] == 9
    assert out.pixels[59, 59] == 5


def test_crop_oversized_returns_whole_image():
    img = constant(4, h=20, w=30)
    out = crop_patch(img, (10, 10), (64, 64))
    assert out.shape == (20, 30)


@settings(max_examples=50, deadline=None)
@given(st.integers(-20, 120), st.integers(-20, 120))
def test_crop_dimensions_always_requested(cx, cy):
    img = constant(0, h=80, w=90)
    out = crop_patch(img, (cx, cy), (32, 16))
    assert out.shape == (16, 32)


# --- resize_bilinear ----------------------------------------------------------


def test_resize_same_dims_identity():
    pixels = rng.integers(0, 256, size=(9, 7), dtype=np.uint8)
    img = gray(pixels)
    out = resize_bilinear(img, 7, 9)
    assert np.array_equal(out.pixels, pixels)


def test_resize_constant_stays_constant():
    out = resize_bilinear(constant(42, 5, 5), 13, 3)
    assert (out.pixels == 42).all()


def test_resize_checkerboard_center():
    img = gray([[0, 255], [255, 0]])
    out = resize_bilinear(img, 3, 3)
    # corner-aligned: center samples at (0.5, 0.5); 127.5 rounds half-up
    assert out.pixels[1, 1] == 128
    assert out.pixels[0, 0] == 0
    assert out.pixels[2, 2] == 0
    assert out.pixels[0, 2] == 255


# --- image_mean ----------------------------------------------------------------


def test_mean_examples():
    assert image_mean(constant(100)) == 100.0
    half = np.zeros((4, 4), dtype=np.uint8)
    half[:2] = 255
    assert image_mean(gray(half)) == 127.5
    pixels = rng.integers(0, 256, size=(4, 4), dtype=np.uint8)
    assert image_mean(gray(pixels)) == pytest.approx(pixels.sum() / 16.0)


# --- container & I/O --------------------------------------------------------------


def test_grayimage_rejects_bad_shapes():
    with pytest.raises(ParameterError):
        GrayImage(np.zeros((0, 4), dtype=np.uint8))
    with pytest.raises(ParameterError):
        GrayImage(np.zeros(7, dtype=np.uint8))


def test_grayimage_is_immutable():
    img = constant(5)
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 9


def test_pgm_round_trip(tmp_path):
    pixels = rng.integers(0, 256, size=(11, 17), dtype=np.uint8)
    path = tmp_path / "frame.pgm"
    write_pgm(gray(pixels), path)
    back = read_pgm(path)
    assert np.array_equal(back.pixels, pixels)


def test_pgm_reads_comments(tmp_path):
    path = tmp_path / "c.pgm"
    body = bytes(range(6))
    path.write_bytes(b"P5\n# a comment\n3 2\n255\n" + body)
    img = read_pgm(path)
    assert img.shape == (2, 3)
    assert img.pixels[1, 2] == 5
