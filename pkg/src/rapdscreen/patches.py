"""Patch-scan pupil localizer: overlapping tiles classified pupil/no-pupil,
with the component-wise median of the top-5 most confident tile centers as
the pupil estimate. Ships a trainable logistic baseline classifier plus a
JSON weight-file loader shared with external trainers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ExtractionError,
    LocalizationError,
    ParameterError,
    TrainingError,
    WeightFileError,
)
from .image import GrayImage, _to_u8, resize_bilinear, _sample_positions
from .localize import PupilFit

__all__ = [
    "PatchSample",
    "ClassifierModel",
    "SplitSpec",
    "split_samples",
    "tile_grid",
    "extract_labeled_patches",
    "train_baseline_classifier",
    "classify_patch",
    "patch_localize",
    "save_classifier",
    "load_classifier",
]

CLASSIFIER_INPUT_SIDE = 50
STD_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class PatchSample:
    """A classifier-ready patch with its source-frame center."""

    pixels: GrayImage
    center: tuple[int, int]
    label: Optional[bool] = None
    confidence: Optional[float] = None


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Pupil/no-pupil patch classifier over standardized pixels.

    kind 'linear': confidence = sigmoid(w . x + b) with len(weights) ==
    input_side**2 and one bias term. kind 'mlp1' adds one ReLU hidden
    layer: weights holds W1 (hidden x d, row-major) then W2 (hidden), bias
    holds b1 (hidden) then b2. Inputs are standardized per stored mean/std.
    """

    kind: str
    input_side: int
    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    hidden_width: Optional[int] = None
    trained_by: str = "baseline-sgd"
    val_accuracy: Optional[float] = None

    def __post_init__(self):
        d = self.input_side * self.input_side
        if self.kind == "linear":
            expected_w, expected_b = d, 1
        elif self.kind == "mlp1":
            if not self.hidden_width or self.hidden_width < 1:
                raise WeightFileError("hidden_width: required for kind 'mlp1'")
            expected_w = self.hidden_width * d + self.hidden_width
            expected_b = self.hidden_width + 1
        else:
            raise WeightFileError(f"kind: unknown classifier kind {self.kind!r}")
        for name, arr, expected in (
            ("mean", self.mean, d),
            ("std", self.std, d),
            ("weights", self.weights, expected_w),
            ("bias", self.bias, expected_b),
        ):
            if arr.shape != (expected,):
                raise WeightFileError(
                    f"{name}: expected {expected} values for kind={self.kind}, "
                    f"input_side={self.input_side}, got {arr.shape[0]}"
                )
            if not np.isfinite(arr).all():
                raise WeightFileError(f"{name}: contains non-finite values")


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/validation/test fractions (default 0.6/0.2/0.2)."""

    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"split fractions must sum to 1.0, got {total}")


def split_samples(samples: list, spec: SplitSpec) -> tuple[list, list, list]:
    """Seeded shuffle into train/val/test lists per the split fractions."""
    perm = np.random.default_rng(spec.seed).permutation(len(samples))
    n_train = int(round(spec.train_fraction * len(samples)))
    n_val = int(round(spec.val_fraction * len(samples)))
    train = [samples[i] for i in perm[:n_train]]
    val = [samples[i] for i in perm[n_train : n_train + n_val]]
    test = [samples[i] for i in perm[n_train + n_val :]]
    return train, val, test


# --- tiling -------------------------------------------------------------------


def tile_grid(width: int, height: int, patch_size: int) -> list[tuple[int, int]]:
    """Tile origins at multiples of stride = patch_size // 2, with a final
    tile flush to the right/bottom border so the whole frame is covered."""
    stride = patch_size // 2

    def axis_origins(extent: int) -> list[int]:
        if extent < patch_size:
            return []
        origins = list(range(0, extent - patch_size + 1, stride))
        last = extent - patch_size
        if origins[-1] != last:
            origins.append(last)
        return origins

    return [(ox, oy) for oy in axis_origins(height) for ox in axis_origins(width)]


def _tile_center(origin: tuple[int, int], patch_size: int) -> tuple[int, int]:
    return (origin[0] + patch_size // 2, origin[1] + patch_size // 2)


def extract_labeled_patches(
    img: GrayImage,
    pupil_center: tuple[float, float],
    patch_size: int,
    balance_seed: int,
    input_side: int = CLASSIFIER_INPUT_SIDE,
) -> list[PatchSample]:
    """Tile the frame, label tiles covering the pupil-center pixel as pupil,
    and subsample negatives (seeded) to match the positive count."""
    if patch_size < 16:
        raise ParameterError(f"patch_size must be >= 16, got {patch_size}")
    cx = int(math.floor(pupil_center[0] + 0.5))
    cy = int(math.floor(pupil_center[1] + 0.5))
    if not (0 <= cx < img.width and 0 <= cy < img.height):
        raise ParameterError(f"pupil center {pupil_center} outside image {img.shape}")
    origins = tile_grid(img.width, img.height, patch_size)
    positives: list[tuple[int, int]] = []
    negatives: list[tuple[int, int]] = []
    for ox, oy in origins:
        covered = ox <= cx < ox + patch_size and oy <= cy < oy + patch_size
        (positives if covered else negatives).append((ox, oy))
    if not positives:
        raise ExtractionError("no tile covered the pupil center")
    if len(negatives) < len(positives):
        raise ExtractionError(
            f"cannot balance: {len(positives)} positives vs {len(negatives)} negatives"
        )
    rng = np.random.default_rng(balance_seed)
    chosen = np.sort(rng.choice(len(negatives), size=len(positives), replace=False))

    def sample(origin: tuple[int, int], label: bool) -> PatchSample:
        ox, oy = origin
        tile = GrayImage(img.pixels[oy : oy + patch_size, ox : ox + patch_size])
        return PatchSample(
            pixels=resize_bilinear(tile, input_side, input_side),
            center=_tile_center(origin, patch_size),
            label=label,
        )

    out = [sample(origin, True) for origin in positives]
    out.extend(sample(negatives[i], False) for i in chosen)
    return out


# --- classification -----------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(model: ClassifierModel, x_std: np.ndarray) -> np.ndarray:
    if model.kind == "linear":
        z = x_std @ model.weights + model.bias[0]
    else:
        d = model.input_side * model.input_side
        hw = model.hidden_width
        w1 = model.weights[: hw * d].reshape(hw, d)
        w2 = model.weights[hw * d :]
        hidden = np.maximum(x_std @ w1.T + model.bias[:hw], 0.0)
        z = hidden @ w2 + model.bias[hw]
    return _sigmoid(np.atleast_1d(z))


def _standardize(model: ClassifierModel, raw: np.ndarray) -> np.ndarray:
    return (raw - model.mean) / np.maximum(model.std, STD_FLOOR)


def classify_patch(model: ClassifierModel, patch: GrayImage) -> float:
    """Pupil-class probability in [0, 1]; deterministic."""
    if patch.width != model.input_side or patch.height != model.input_side:
        patch = resize_bilinear(patch, model.input_side, model.input_side)
    x = _standardize(model, patch.astype_float().ravel())
    return float(_forward(model, x[None, :])[0])


def _classify_raw_batch(model: ClassifierModel, raw: np.ndarray) -> np.ndarray:
    return _forward(model, _standardize(model, raw))


# --- training ------------------------------------------------------------------


def _samples_to_matrix(samples: list[PatchSample], input_side: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.empty((len(samples), input_side * input_side))
    ys = np.empty(len(samples))
    for i, s in enumerate(samples):
        if s.pixels.shape != (input_side, input_side):
            raise ParameterError(
                f"sample {i} has shape {s.pixels.shape}, expected {(input_side, input_side)}"
            )
        if s.label is None:
            raise ParameterError(f"sample {i} is unlabeled")
        xs[i] = s.pixels.astype_float().ravel()
        ys[i] = float(s.label)
    return xs, ys


def train_baseline_classifier(
    train: list[PatchSample],
    val: list[PatchSample],
    epochs: int,
    seed: int,
    learning_rate: float = 0.01,
    batch_size: int = 32,
) -> ClassifierModel:
    """Logistic model over standardized pixels, seeded mini-batch SGD.

    Returns the epoch snapshot with the best validation accuracy; the
    model records the training set's per-input mean/std.
    """
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")
    if not train:
        raise TrainingError("empty training set")
    input_side = train[0].pixels.width
    x_train, y_train = _samples_to_matrix(train, input_side)
    n_pos = int(y_train.sum())
    n_neg = len(y_train) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("training set contains a single class")
    if abs(n_pos - n_neg) > 0.1 * len(y_train):
        raise TrainingError(f"training set unbalanced: {n_pos} positive vs {n_neg} negative")

    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    x_std = (x_train - mean) / np.maximum(std, STD_FLOOR)
    if val:
        x_val, y_val = _samples_to_matrix(val, input_side)
        x_val = (x_val - mean) / np.maximum(std, STD_FLOOR)

    rng = np.random.default_rng(seed)
    d = input_side * input_side
    w = np.zeros(d)
    b = 0.0
    best = (-1.0, w.copy(), b)
    for _ in range(epochs):
        perm = rng.permutation(len(y_train))
        for start in range(0, len(perm), batch_size):
            idx = perm[start : start + batch_size]
            xb, yb = x_std[idx], y_train[idx]
            err = _sigmoid(xb @ w + b) - yb
            w -= learning_rate * (xb.T @ err) / len(idx)
            b -= learning_rate * float(err.mean())
        if val:
            acc = float((( _sigmoid(x_val @ w + b) >= 0.5) == y_val.astype(bool)).mean())
        else:
            acc = float((( _sigmoid(x_std @ w + b) >= 0.5) == y_train.astype(bool)).mean())
        if acc > best[0]:
            best = (acc, w.copy(), b)
    val_acc, w, b = best
    return ClassifierModel(
        kind="linear",
        input_side=input_side,
        mean=mean,
        std=std,
        weights=w,
        bias=np.array([b]),
        trained_by="baseline-sgd",
        val_accuracy=val_acc,
    )


# --- localization ----------------------------------------------------------------


def _resize_tiles(tiles: np.ndarray, side: int) -> np.ndarray:
    """Bilinear-resize a stack (n, p, p) of uint8 tiles to (n, side, side),
    matching resize_bilinear's corner-aligned sampling and rounding."""
    n, p, _ = tiles.shape
    if p == side:
        return tiles.reshape(n, -1).astype(np.float64)
    pos = _sample_positions(side, p)
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, p - 1)
    i1 = np.minimum(i0 + 1, p - 1)
    frac = pos - i0
    f = tiles.astype(np.float64)
    rows = f[:, i0, :] * (1 - frac)[None, :, None] + f[:, i1, :] * frac[None, :, None]
    out = rows[:, :, i0] * (1 - frac)[None, None, :] + rows[:, :, i1] * frac[None, None, :]
    return _to_u8(out).astype(np.float64).reshape(n, -1)


def patch_localize(model: ClassifierModel, img: GrayImage, patch_size: int) -> PupilFit:
    """Scan with stride patch_size/2, classify every tile, and take the
    component-wise median of the top-5 most confident tile centers.

    Equal confidences are ordered by raster index of the tile origin, so
    repeated runs give identical results.
    """
    origins = tile_grid(img.width, img.height, patch_size)
    if not origins:
        raise LocalizationError(
            f"image {img.shape} smaller than patch size {patch_size}: no tiles"
        )
    tiles = np.stack([img.pixels[oy : oy + patch_size, ox : ox + patch_size] for ox, oy in origins])
    confidences = _classify_raw_batch(model, _resize_tiles(tiles, model.input_side))
    raster = np.arange(len(origins))
    order = np.lexsort((raster, -confidences))
    top = order[: min(5, len(order))]
    centers = np.array([_tile_center(origins[i], patch_size) for i in top], dtype=np.float64)
    center = (float(np.median(centers[:, 0])), float(np.median(centers[:, 1])))
    return PupilFit(
        center=center,
        radius=None,
        confidence=float(confidences[top].mean()),
        method="patch",
    )


# --- weight files -----------------------------------------------------------------


def save_classifier(model: ClassifierModel, path) -> None:
    """Write the shared JSON weight-file format (schema_version 1)."""
    payload: dict = {
        "schema_version": 1,
        "kind": model.kind,
        "input_side": model.input_side,
    }
    if model.kind == "mlp1":
        payload["hidden_width"] = model.hidden_width
    payload.update(
        mean=model.mean.tolist(),
        std=model.std.tolist(),
        weights=model.weights.tolist(),
        bias=model.bias.tolist(),
        trained_by=model.trained_by,
        val_accuracy=model.val_accuracy,
    )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _require_field(data: dict, name: str):
    if name not in data:
        raise WeightFileError(f"{name}: missing required field")
    return data[name]


def load_classifier(path) -> ClassifierModel:
    """Load a weight file, validating schema, dimensions, and finiteness.
    load(save(m)) reproduces confidences exactly."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise WeightFileError(f"cannot read weight file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise WeightFileError("weight file root must be a JSON object")
    version = _require_field(data, "schema_version")
    if version != 1:
        raise WeightFileError(f"schema_version: unsupported value {version!r}")
    kind = _require_field(data, "kind")
    input_side = _require_field(data, "input_side")
    if not isinstance(input_side, int) or input_side < 1:
        raise WeightFileError(f"input_side: must be a positive integer, got {input_side!r}")

    def array_field(name: str) -> np.ndarray:
        values = _require_field(data, name)
        try:
            arr = np.asarray(values, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise WeightFileError(f"{name}: not a numeric array") from exc
        if arr.ndim != 1:
            raise WeightFileError(f"{name}: expected a flat array")
        return arr

    return ClassifierModel(
        kind=kind,
        input_side=input_side,
        mean=array_field("mean"),
        std=array_field("std"),
        weights=array_field("weights"),
        bias=array_field("bias"),
        hidden_width=data.get("hidden_width"),
        trained_by=data.get("trained_by", "unknown"),
        val_accuracy=data.get("val_accuracy"),
    )
