"""Annotated-image ingestion and balanced patch datasets.

Reads directories of grayscale images with a per-image pupil-center
annotation file, tiles each image into overlapping patches (stride half
the patch size, final tile flush to the border), labels a patch positive
iff it covers the annotated center pixel, and subsamples negatives to
match the positive count.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "AnnotatedImage",
    "PatchDataset",
    "read_annotations",
    "tile_origins",
    "extract_balanced_patches",
    "build_patch_dataset",
]

PATCH_SIZE_GRID = (50, 75, 100, 125, 150)
ANNOTATION_FILE = "annotations.txt"


class DatasetError(Exception):
    """Missing or malformed annotation data."""


@dataclass(frozen=True)
class AnnotatedImage:
    path: Path
    center: tuple[float, float]


@dataclass(frozen=True)
class PatchDataset:
    """Balanced patches split 60/20/20; pixels are uint8 (n, p, p)."""

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    patch_size: int

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train_y), len(self.val_y), len(self.test_y)


def read_annotations(root) -> list[AnnotatedImage]:
    """Parse `annotations.txt` lines of the form `relative/path x y`."""
    root = Path(root)
    ann_path = root / ANNOTATION_FILE
    if not ann_path.exists():
        raise DatasetError(f"missing annotation file: {ann_path}")
    images = []
    for lineno, line in enumerate(ann_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DatasetError(f"{ann_path}:{lineno}: expected 'path x y', got {line!r}")
        path = root / parts[0]
        if not path.exists():
            raise DatasetError(f"{ann_path}:{lineno}: image not found: {path}")
        images.append(AnnotatedImage(path=path, center=(float(parts[1]), float(parts[2]))))
    if not images:
        raise DatasetError(f"no annotated images in {ann_path}")
    return images


def load_gray(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def tile_origins(width: int, height: int, patch_size: int) -> list[tuple[int, int]]:
    """Origins at multiples of stride = patch_size // 2, plus a final tile
    flush to the right/bottom border."""
    stride = patch_size // 2

    def axis(extent: int) -> list[int]:
        if extent < patch_size:
            return []
        out = list(range(0, extent - patch_size + 1, stride))
        if out[-1] != extent - patch_size:
            out.append(extent - patch_size)
        return out

    return [(ox, oy) for oy in axis(height) for ox in axis(width)]


def extract_balanced_patches(pixels: np.ndarray, center: tuple[float, float],
                             patch_size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """All positive tiles (covering the center pixel) plus an equal count
    of seeded negative tiles; returns (patches, labels)."""
    h, w = pixels.shape
    cx = int(np.floor(center[0] + 0.5))
    cy = int(np.floor(center[1] + 0.5))
    positives, negatives = [], []
    for ox, oy in tile_origins(w, h, patch_size):
        tile = pixels[oy : oy + patch_size, ox : ox + patch_size]
        if ox <= cx < ox + patch_size and oy <= cy < oy + patch_size:
            positives.append(tile)
        else:
            negatives.append(tile)
    if not positives:
        raise DatasetError(f"no tile covered the center {center} in a {w}x{h} image")
    if len(negatives) < len(positives):
        raise DatasetError("not enough negative tiles to balance the positives")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(negatives), size=len(positives), replace=False))
    patches = np.stack(positives + [negatives[i] for i in chosen])
    labels = np.concatenate([np.ones(len(positives), bool), np.zeros(len(positives), bool)])
    return patches, labels


def build_patch_dataset(roots, patch_size: int, seed: int,
                        split: tuple[float, float, float] = (0.6, 0.2, 0.2)) -> PatchDataset:
    """Extract patches from every annotated image under the given roots and
    split them (default 60/20/20) with a seeded shuffle."""
    if patch_size < 16:
        raise DatasetError(f"patch size too small: {patch_size}")
    all_patches, all_labels = [], []
    for root_index, root in enumerate([roots] if isinstance(roots, (str, Path)) else list(roots)):
        for image_index, annotated in enumerate(read_annotations(root)):
            pixels = load_gray(annotated.path)
            patch_seed = int(np.random.SeedSequence([seed, root_index, image_index]).generate_state(1)[0])
            patches, labels = extract_balanced_patches(pixels, annotated.center, patch_size, patch_seed)
            all_patches.append(patches)
            all_labels.append(labels)
    x = np.concatenate(all_patches)
    y = np.concatenate(all_labels)
    perm = np.random.default_rng(seed).permutation(len(y))
    n_train = int(round(split[0] * len(y)))
    n_val = int(round(split[1] * len(y)))
    idx_train = perm[:n_train]
    idx_val = perm[n_train : n_train + n_val]
    idx_test = perm[n_train + n_val :]
    return PatchDataset(
        train_x=x[idx_train], train_y=y[idx_train],
        val_x=x[idx_val], val_y=y[idx_val],
        test_x=x[idx_test], test_y=y[idx_test],
        patch_size=patch_size,
    )
