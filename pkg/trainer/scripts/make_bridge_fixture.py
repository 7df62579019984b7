#!/usr/bin/env python3
"""Produce the committed cross-package fixture: run a full student export
on synthetic annotated images, then trim it to a small patch sample so the
screening package can verify weight-file compatibility offline.

Usage:
    python scripts/make_bridge_fixture.py --out ../tests/fixtures/student_bridge
"""

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from synth_images import write_annotated_dir  # noqa: E402

from rapdtrainer.dataset import build_patch_dataset  # noqa: E402
from rapdtrainer.export import export_student  # noqa: E402
from rapdtrainer.transfer import TrainRun, train_transfer  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--keep", type=int, default=32, help="fixture patches to keep")
    args = parser.parse_args()

    work = Path(tempfile.mkdtemp())
    root = write_annotated_dir(work / "imgs", n_images=160, seed=21)
    data = build_patch_dataset(root, patch_size=50, seed=6)
    run = TrainRun(patch_size=50, epochs=8, seed=3, backbone="random", learning_rate=0.5)
    result = train_transfer(run, data)
    calibration = np.concatenate([data.train_x, data.val_x, data.test_x])
    export = export_student(result.model, calibration, work / "export",
                            seed=7, val_accuracy=result.val_accuracy)
    print(f"export agreement {export.agreement:.4f} over {export.n_patches} patches")

    out = Path(args.out)
    if out.exists():
        shutil.rmtree(out)
    (out / "fixture_patches").mkdir(parents=True)
    shutil.copy(export.weights_path, out / "student_classifier.json")
    fixtures = json.loads(export.fixtures_path.read_text())
    kept = fixtures["patches"][: args.keep]
    for entry in kept:
        name = f"{entry['sha256']}.pgm"
        shutil.copy(export.patches_dir / name, out / "fixture_patches" / name)
    fixtures["patches"] = kept
    fixtures["note"] = f"trimmed to {len(kept)} patches for the committed fixture"
    (out / "fixtures.json").write_text(json.dumps(fixtures, indent=2) + "\n")
    print(f"wrote trimmed fixture ({len(kept)} patches) -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
