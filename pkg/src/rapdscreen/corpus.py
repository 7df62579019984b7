"""Case directories on disk: `<case_id>/{right,left}/frame_%05d.pgm` plus
`manifest.json`. The manifest schema doubles as the ingestion contract for
real recordings (ground_truth is optional there)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IngestionError, ParameterError
from .image import GrayImage, read_pgm, write_pgm
from .reflex import StimInterval
from .synth import SimParams, TestCase, generate_case

__all__ = ["LoadedCase", "write_case", "load_case", "list_case_dirs", "generate_corpus"]


@dataclass(frozen=True, eq=False)
class LoadedCase:
    case_id: str
    fps: float
    frame_size: tuple[int, int]
    schedule: tuple[StimInterval, ...]
    label: Optional[str]
    affected_eye: Optional[str]
    alpha: Optional[float]
    ground_truth: Optional[dict]
    right_frames: list[GrayImage]
    left_frames: list[GrayImage]

    def frames(self, eye: str) -> list[GrayImage]:
        return self.right_frames if eye == "right" else self.left_frames

    def truth(self, eye: str) -> np.ndarray:
        if self.ground_truth is None or eye not in self.ground_truth:
            raise IngestionError(f"case {self.case_id} has no ground truth for {eye}")
        return np.asarray(self.ground_truth[eye], dtype=np.float64)

    @property
    def analytic_index(self) -> Optional[float]:
        if self.ground_truth is None:
            return None
        return self.ground_truth.get("analytic_index")


def write_case(case: TestCase, root) -> Path:
    """Write one test case under `root/<case_id>/`."""
    case_dir = Path(root) / case.case_id
    manifest = {
        "case_id": case.case_id,
        "fps": case.params.fps,
        "frame_size": list(case.params.frame_size),
        "schedule": [
            {"eye_stimulated": iv.eye_stimulated, "start_frame": iv.start_frame, "end_frame": iv.end_frame}
            for iv in case.schedule
        ],
        "label": case.label,
        "affected_eye": case.affected_eye,
        "alpha": case.alpha,
        "ground_truth": {
            "analytic_index": case.analytic_index,
            "right": case.ground_truth["right"].tolist(),
            "left": case.ground_truth["left"].tolist(),
        },
    }
    for eye, frames in (("right", case.right_frames), ("left", case.left_frames)):
        eye_dir = case_dir / eye
        eye_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(frames):
            write_pgm(frame, eye_dir / f"frame_{i:05d}.pgm")
    with open(case_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)
        fh.write("\n")
    return case_dir


def load_case(case_dir) -> LoadedCase:
    """Read a case directory; raises IngestionError naming the missing piece."""
    case_dir = Path(case_dir)
    manifest_path = case_dir / "manifest.json"
    if not manifest_path.exists():
        raise IngestionError(f"missing manifest: {manifest_path}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise IngestionError(f"unreadable manifest {manifest_path}: {exc}") from exc
    for field in ("fps", "frame_size", "schedule"):
        if field not in manifest:
            raise IngestionError(f"manifest {manifest_path} lacks required field {field!r}")

    frames: dict[str, list[GrayImage]] = {}
    for eye in ("right", "left"):
        eye_dir = case_dir / eye
        if not eye_dir.is_dir():
            raise IngestionError(f"missing frame directory: {eye_dir}")
        paths = sorted(eye_dir.glob("frame_*.pgm"))
        if not paths:
            raise IngestionError(f"no frames in {eye_dir}")
        frames[eye] = [read_pgm(p) for p in paths]

    schedule = tuple(
        StimInterval(iv["eye_stimulated"], int(iv["start_frame"]), int(iv["end_frame"]))
        for iv in manifest["schedule"]
    )
    return LoadedCase(
        case_id=manifest.get("case_id", case_dir.name),
        fps=float(manifest["fps"]),
        frame_size=tuple(manifest["frame_size"]),
        schedule=schedule,
        label=manifest.get("label"),
        affected_eye=manifest.get("affected_eye"),
        alpha=manifest.get("alpha"),
        ground_truth=manifest.get("ground_truth"),
        right_frames=frames["right"],
        left_frames=frames["left"],
    )


def list_case_dirs(corpus_dir) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise IngestionError(f"corpus directory not found: {corpus_dir}")
    dirs = sorted(p for p in corpus_dir.iterdir() if (p / "manifest.json").exists())
    if not dirs:
        raise IngestionError(f"no case directories under {corpus_dir}")
    return dirs


def generate_corpus(
    root,
    count_per_class: int,
    seed: int,
    params: SimParams = SimParams(),
    alpha_range: tuple[float, float] = (0.2, 0.6),
) -> list[str]:
    """Write count_per_class healthy + count_per_class RAPD cases, with the
    positive cases' alpha uniform over alpha_range and the affected eye
    chosen at random. Cases interleave so any prefix stays balanced."""
    if count_per_class < 1:
        raise ParameterError(f"count_per_class must be >= 1, got {count_per_class}")
    from dataclasses import replace

    case_ids = []
    for idx in range(2 * count_per_class):
        case_seed = int(np.random.SeedSequence([seed, idx]).generate_state(1)[0])
        case_params = replace(params, seed=case_seed)
        case_id = f"case{idx:03d}"
        if idx % 2 == 0:
            case = generate_case(case_params, "no_rapd", case_id=case_id)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([seed, idx, 1]))
            alpha = float(rng.uniform(*alpha_range))
            affected = "left" if rng.random() < 0.5 else "right"
            case = generate_case(case_params, "rapd_positive", affected, alpha, case_id=case_id)
        write_case(case, root)
        case_ids.append(case_id)
    return case_ids
