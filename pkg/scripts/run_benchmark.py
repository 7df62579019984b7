#!/usr/bin/env python3
"""Full screening experiment: generate a ground-truthed corpus, train the
baseline patch classifier on it, then benchmark all four localizers
at their reference crop configurations and print the metric table.

Usage:
    python scripts/run_benchmark.py --out bench_out [--cases 32] [--seed 20240]
"""

import argparse
import sys
import time
from pathlib import Path

from rapdscreen.corpus import generate_corpus
from rapdscreen.evaluate import RunConfig, run_benchmark, train_baseline_from_corpus, write_benchmark_outputs
from rapdscreen.patches import save_classifier


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="bench_out")
    parser.add_argument("--cases", type=int, default=32, help="cases per class")
    parser.add_argument("--seed", type=int, default=20240)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out)
    corpus = out / "corpus"
    t0 = time.perf_counter()
    print(f"generating {2 * args.cases} cases -> {corpus}")
    generate_corpus(corpus, args.cases, args.seed)

    print("training the baseline patch classifier")
    model, report = train_baseline_from_corpus(corpus, seed=args.seed)
    weights = out / "baseline_classifier.json"
    out.mkdir(parents=True, exist_ok=True)
    save_classifier(model, weights)
    print(f"  val accuracy {report['val_accuracy']:.4f}, test {report['test_accuracy']:.4f}")

    configs = [
        RunConfig("patch", "half_image", "mov_avg", "rapd_index", classifier_path=str(weights)),
        RunConfig("starburst", "fixed_60", "mov_avg", "rapd_index"),
        RunConfig("excuse", "half_image", "mov_avg", "rapd_index"),
        RunConfig("else", "half_image", "mov_avg", "rapd_index"),
    ]
    print("benchmarking 4 localizer configurations")
    rows = run_benchmark(corpus, configs, workers=args.workers)
    write_benchmark_outputs(rows, out)
    print(f"\n{'localizer':<10} {'thr':>6} {'prec':>6} {'sens':>6} {'spec':>6} "
          f"{'acc':>6} {'f1':>6} {'aucPR':>6} {'aucROC':>6}")
    for row in rows:
        m = row.metrics
        print(f"{row.config.localizer:<10} {row.threshold:>6.3f} {m['precision']:>6.3f} "
              f"{m['sensitivity_tpr']:>6.3f} {m['specificity_tnr']:>6.3f} {m['accuracy']:>6.3f} "
              f"{m['f1']:>6.3f} {m['auc_pr']:>6.3f} {m['auc_roc']:>6.3f}")
    print(f"\ntotal {time.perf_counter() - t0:.0f}s; outputs in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
