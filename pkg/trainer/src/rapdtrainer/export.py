"""Compact student export: fit a small classifier on the teacher's soft
labels over raw normalized pixels and write the shared weight-file format
plus cross-implementation verification fixtures.

The fixtures pair each calibration patch (stored as a PGM named by the
sha256 of its raw row-major bytes) with the teacher's and the student's
confidence, so an independent consumer of the weight file can verify its
forward pass to tight tolerance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import load_gray
from .transfer import PupilHead, teacher_probabilities

__all__ = ["ExportRefusedError", "StudentExport", "fit_student", "export_student"]

STUDENT_INPUT_SIDE = 50
STD_FLOOR = 1e-6
MIN_CALIBRATION_PATCHES = 1000
MIN_AGREEMENT = 0.90
INDIFFERENCE_BAND = 0.05  # a teacher this close to 0.5 everywhere is untrained
SCHEMA_VERSION = 1


class ExportRefusedError(RuntimeError):
    """Student/teacher decision agreement fell below the export gate."""

    def __init__(self, report: dict):
        super().__init__(f"export refused: agreement {report['agreement']:.3f} < {MIN_AGREEMENT}")
        self.report = report


@dataclass(frozen=True)
class StudentExport:
    weights_path: Path
    fixtures_path: Path
    patches_dir: Path
    agreement: float
    n_patches: int


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _resize_to_student(patches: np.ndarray) -> np.ndarray:
    """Corner-aligned bilinear resize to the student input side, rounded
    half-up to uint8 (the convention of the shared patch format)."""
    n, p, _ = patches.shape
    s = STUDENT_INPUT_SIDE
    if p == s:
        return patches.copy()
    pos = np.arange(s) * ((p - 1) / (s - 1)) if s > 1 else np.array([(p - 1) / 2.0])
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, p - 1)
    i1 = np.minimum(i0 + 1, p - 1)
    frac = pos - i0
    f = patches.astype(np.float64)
    rows = f[:, i0, :] * (1 - frac)[None, :, None] + f[:, i1, :] * frac[None, :, None]
    out = rows[:, :, i0] * (1 - frac)[None, None, :] + rows[:, :, i1] * frac[None, None, :]
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def fit_student(raw_pixels: np.ndarray, teacher_probs: np.ndarray, seed: int,
                iterations: int = 500, learning_rate: float = 0.01):
    """Deterministic full-batch logistic fit (Adam) against the teacher's
    soft labels over standardized raw pixels; returns (mean, std, w, b)."""
    x = raw_pixels.reshape(len(raw_pixels), -1).astype(np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    xs = (x - mean) / np.maximum(std, STD_FLOOR)
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1e-3, xs.shape[1])
    b = 0.0
    mw = np.zeros_like(w)
    vw = np.zeros_like(w)
    mb = vb = 0.0
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for t in range(1, iterations + 1):
        err = _sigmoid(xs @ w + b) - teacher_probs
        gw = (xs.T @ err) / len(xs)
        gb = float(err.mean())
        mw = beta1 * mw + (1 - beta1) * gw
        vw = beta2 * vw + (1 - beta2) * gw * gw
        mb = beta1 * mb + (1 - beta1) * gb
        vb = beta2 * vb + (1 - beta2) * gb * gb
        w -= learning_rate * (mw / (1 - beta1**t)) / (np.sqrt(vw / (1 - beta2**t)) + eps)
        b -= learning_rate * (mb / (1 - beta1**t)) / (np.sqrt(vb / (1 - beta2**t)) + eps)
    return mean, std, w, b


def _write_pgm(pixels: np.ndarray, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def export_student(
    teacher: PupilHead,
    calibration_patches: np.ndarray,
    out_dir,
    kind: str = "linear",
    seed: int = 0,
    val_accuracy: float | None = None,
) -> StudentExport:
    """Distill the teacher into the compact shared format and write the
    verification fixtures. Refuses (without writing) when student/teacher
    decision agreement is below 90%."""
    if kind != "linear":
        raise ValueError("only the linear student is exported for now")
    if len(calibration_patches) < MIN_CALIBRATION_PATCHES:
        raise ValueError(
            f"need >= {MIN_CALIBRATION_PATCHES} calibration patches, got {len(calibration_patches)}"
        )
    student_pixels = _resize_to_student(np.asarray(calibration_patches))
    teacher_probs = teacher_probabilities(teacher, calibration_patches)
    mean, std, w, b = fit_student(student_pixels, teacher_probs, seed=seed)
    xs = (student_pixels.reshape(len(student_pixels), -1).astype(np.float64) - mean) / np.maximum(std, STD_FLOOR)
    student_probs = _sigmoid(xs @ w + b)
    teacher_pos = teacher_probs >= 0.5
    agreement = float(((student_probs >= 0.5) == teacher_pos).mean())
    max_margin = float(np.abs(teacher_probs - 0.5).max())
    report = {
        "agreement": agreement,
        "n_patches": int(len(student_pixels)),
        "teacher_positive_rate": float(teacher_pos.mean()),
        "student_positive_rate": float((student_probs >= 0.5).mean()),
        "teacher_max_margin": max_margin,
        "mean_probability_gap": float(np.abs(student_probs - teacher_probs).mean()),
    }
    # degenerate teachers are trivially "matched" and must not ship: an
    # untrained model never commits (all probabilities hug 0.5) or calls a
    # single class on everything
    degenerate = teacher_pos.all() or not teacher_pos.any() or max_margin < INDIFFERENCE_BAND
    if agreement < MIN_AGREEMENT or degenerate:
        raise ExportRefusedError(report)

    out_dir = Path(out_dir)
    patches_dir = out_dir / "fixture_patches"
    patches_dir.mkdir(parents=True, exist_ok=True)
    weights_path = out_dir / "student_classifier.json"
    fixtures_path = out_dir / "fixtures.json"

    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "linear",
        "input_side": STUDENT_INPUT_SIDE,
        "mean": mean.tolist(),
        "std": std.tolist(),
        "weights": w.tolist(),
        "bias": [b],
        "trained_by": "transfer-student",
        "val_accuracy": agreement if val_accuracy is None else val_accuracy,
    }
    with open(weights_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")

    entries = []
    for pixels, t_prob, s_prob in zip(student_pixels, teacher_probs, student_probs):
        digest = hashlib.sha256(pixels.tobytes()).hexdigest()
        _write_pgm(pixels, patches_dir / f"{digest}.pgm")
        entries.append({"sha256": digest, "teacher": float(t_prob), "student": float(s_prob)})
    with open(fixtures_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "input_side": STUDENT_INPUT_SIDE,
                "hash": "sha256 of raw row-major uint8 patch bytes",
                "weights_file": weights_path.name,
                "patches": entries,
                **report,
            },
            fh,
        )
        fh.write("\n")
    return StudentExport(
        weights_path=weights_path,
        fixtures_path=fixtures_path,
        patches_dir=patches_dir,
        agreement=agreement,
        n_patches=len(entries),
    )


def verify_fixtures(fixtures_path, confidence_fn) -> float:
    """Replay the fixtures against any classifier callable on uint8 patch
    arrays; returns the max |confidence - recorded student| deviation."""
    fixtures_path = Path(fixtures_path)
    with open(fixtures_path, "r", encoding="utf-8") as fh:
        fixtures = json.load(fh)
    patches_dir = fixtures_path.parent / "fixture_patches"
    worst = 0.0
    for entry in fixtures["patches"]:
        pixels = load_gray(patches_dir / f"{entry['sha256']}.pgm")
        worst = max(worst, abs(confidence_fn(pixels) - entry["student"]))
    return worst
