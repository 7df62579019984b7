"""Trainer command line: fit the transfer model on annotated image
directories and export the compact student with verification fixtures."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataset import PATCH_SIZE_GRID, DatasetError, build_patch_dataset
from .export import ExportRefusedError, export_student
from .transfer import BackboneUnavailableError, TrainRun, train_transfer


def cmd_train(args) -> int:
    run = TrainRun(
        patch_size=args.patch_size,
        epochs=args.epochs,
        seed=args.seed,
        backbone=args.backbone,
    )
    data = build_patch_dataset(args.data, args.patch_size, args.seed)
    print(f"patches: train={data.sizes[0]} val={data.sizes[1]} test={data.sizes[2]}")
    result = train_transfer(run, data)
    for stats in result.history:
        print(f"epoch {stats.epoch}: val_accuracy={stats.val_accuracy:.4f} val_loss={stats.val_loss:.4f}")
    print(f"best epoch {result.best_epoch}: val={result.val_accuracy:.4f} test={result.test_accuracy:.4f}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "patch_size": run.patch_size,
        "epochs": run.epochs,
        "seed": run.seed,
        "backbone": run.backbone,
        "history": [
            {"epoch": s.epoch, "val_accuracy": s.val_accuracy, "val_loss": s.val_loss}
            for s in result.history
        ],
        "best_epoch": result.best_epoch,
        "val_accuracy": result.val_accuracy,
        "test_accuracy": result.test_accuracy,
    }
    with open(out_dir / "train_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")

    if args.export:
        calibration = np.concatenate([data.train_x, data.val_x])
        export = export_student(result.model, calibration, out_dir,
                                seed=args.seed, val_accuracy=result.val_accuracy)
        print(f"student export: agreement={export.agreement:.4f} "
              f"({export.n_patches} fixture patches) -> {export.weights_path}")
    return 0


def cmd_grid(args) -> int:
    """Train every patch size in the grid and print the accuracy table."""
    rows = []
    for patch_size in PATCH_SIZE_GRID:
        run = TrainRun(patch_size=patch_size, epochs=args.epochs, seed=args.seed,
                       backbone=args.backbone)
        data = build_patch_dataset(args.data, patch_size, args.seed)
        result = train_transfer(run, data)
        rows.append({"patch_size": patch_size, "val_accuracy": result.val_accuracy,
                     "test_accuracy": result.test_accuracy})
        print(f"{patch_size}x{patch_size}: val={result.val_accuracy:.3f} test={result.test_accuracy:.3f}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "patch_size_table.json", "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rapdtrainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the transfer model on annotated images")
    p.add_argument("--data", nargs="+", required=True, help="annotated image directories")
    p.add_argument("--patch-size", type=int, default=50, dest="patch_size")
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backbone", default="pretrained",
                   help="pretrained | random | path to an AlexNet .pth checkpoint")
    p.add_argument("--out", default="trainer_out")
    p.add_argument("--export", action="store_true", help="also export the compact student")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="train every patch size in the grid")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backbone", default="pretrained")
    p.add_argument("--out", default="trainer_out")
    p.set_defaults(func=cmd_grid)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BackboneUnavailableError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 3
    except ExportRefusedError as exc:
        print(f"export refused: {json.dumps(exc.report)}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
