import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from rapdscreen.cli import main
from rapdscreen.metrics import select_threshold

TINY_PARAMS = {"swings": 1, "fps": 8.0, "noise_sigma": 3.0}


def corpus_hash(corpus_dir: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(corpus_dir.rglob("*")):
        if path.is_file():
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_corpus")
    params = root / "params.json"
    params.write_text(json.dumps(TINY_PARAMS))
    code = main([
        "generate", "--out", str(root), "--count-per-class", "2",
        "--seed", "7", "--params", str(params),
    ])
    assert code == 0
    return root / "corpus"


def test_generate_writes_balanced_corpus(tiny_corpus):
    cases = sorted(p.name for p in tiny_corpus.iterdir())
    assert cases == ["case000", "case001", "case002", "case003"]
    labels = [json.loads((tiny_corpus / c / "manifest.json").read_text())["label"] for c in cases]
    assert labels.count("no_rapd") == 2
    assert labels.count("rapd_positive") == 2
    frames = list((tiny_corpus / "case000" / "right").glob("frame_*.pgm"))
    assert len(frames) > 0


def test_generate_is_reproducible(tmp_path):
    params = tmp_path / "params.json"
    params.write_text(json.dumps(TINY_PARAMS))
    for sub in ("a", "b"):
        code = main([
            "generate", "--out", str(tmp_path / sub), "--count-per-class", "1",
            "--seed", "11", "--params", str(params),
        ])
        assert code == 0
    assert corpus_hash(tmp_path / "a" / "corpus") == corpus_hash(tmp_path / "b" / "corpus")


def test_generate_rejects_zero_count(tmp_path):
    assert main(["generate", "--out", str(tmp_path), "--count-per-class", "0"]) == 2


def test_assess_healthy_case_decides_no_rapd(tiny_corpus, tmp_path):
    code = main([
        "assess", "--case", str(tiny_corpus / "case000"),
        "--localizer", "starburst", "--out", str(tmp_path),
    ])
    assert code == 0
    result = json.loads((tmp_path / "case000_assessment.json").read_text())
    assert result["decision"] == "no_rapd"
    assert result["score"] <= result["threshold"]
    traces = (tmp_path / "case000_traces.csv").read_text().splitlines()
    assert traces[0] == "frame_index,right_radius,left_radius"
    assert len(traces) > 10


def test_assess_positive_case_at_explicit_threshold(tiny_corpus, tmp_path):
    manifests = {
        c.name: json.loads((c / "manifest.json").read_text())
        for c in tiny_corpus.iterdir()
    }
    positive = next(c for c, m in manifests.items() if m["label"] == "rapd_positive")
    code = main([
        "assess", "--case", str(tiny_corpus / positive),
        "--localizer", "starburst", "--threshold", "0.35", "--out", str(tmp_path),
    ])
    assert code == 0
    result = json.loads((tmp_path / f"{positive}_assessment.json").read_text())
    assert result["threshold"] == 0.35
    # the tiny corpus draws alpha in [0.2, 0.6] -> index comfortably above 0.35
    assert result["decision"] == "rapd_positive"


def test_assess_missing_manifest_exits_4(tmp_path, capsys):
    missing = tmp_path / "nowhere"
    missing.mkdir()
    assert main(["assess", "--case", str(missing)]) == 4
    assert str(missing) in capsys.readouterr().err


def test_assess_pipeline_failure_names_case(tmp_path, capsys):
    from rapdscreen import GrayImage, write_pgm

    case_dir = tmp_path / "blankcase"
    manifest = {"case_id": "blankcase", "fps": 10.0, "frame_size": [64, 64], "schedule": []}
    blank = GrayImage(np.full((64, 64), 128, dtype=np.uint8))
    for eye in ("right", "left"):
        (case_dir / eye).mkdir(parents=True)
        for i in range(6):
            write_pgm(blank, case_dir / eye / f"frame_{i:05d}.pgm")
    (case_dir / "manifest.json").write_text(json.dumps(manifest))
    code = main(["assess", "--case", str(case_dir), "--localizer", "starburst", "--out", str(tmp_path)])
    assert code == 3
    assert "blankcase" in capsys.readouterr().err


def test_measure_emits_per_frame_csv(tiny_corpus, tmp_path):
    code = main([
        "measure", "--case", str(tiny_corpus / "case001"),
        "--localizer", "starburst", "--out", str(tmp_path),
    ])
    assert code == 0
    for eye in ("right", "left"):
        rows = list(csv.DictReader(open(tmp_path / f"case001_{eye}_measurements.csv")))
        assert rows[0].keys() == {"frame_index", "x", "y", "radius", "votes", "status"}
        assert all(r["status"] in ("ok", "localization_failed", "measurement_failed") for r in rows)
        assert sum(r["status"] == "ok" for r in rows) > len(rows) // 2


def test_evaluate_benchmark_table(tiny_corpus, tmp_path):
    code = main([
        "evaluate", "--corpus", str(tiny_corpus),
        "--localizers", "starburst", "--smoothings", "none,mov_avg",
        "--out", str(tmp_path),
    ])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "benchmark.csv")))
    assert len(rows) == 2  # 1 localizer x 2 smoothings
    scatter_files = sorted(tmp_path.glob("scatter_*.csv"))
    roc_files = sorted(tmp_path.glob("roc_*.csv"))
    assert len(scatter_files) == 2 and len(roc_files) == 2

    with open(roc_files[0]) as fh:
        assert fh.readline().strip() == "threshold,fpr,tpr,precision,recall"

    for row in rows:
        # rate identities hold row-wise
        assert float(row["sensitivity_tpr"]) + float(row["fnr"]) == pytest.approx(1.0, abs=1e-9)
        assert float(row["specificity_tnr"]) + float(row["fpr"]) == pytest.approx(1.0, abs=1e-9)
        # threshold column equals select_threshold recomputed from the scatter
        tag = f"starburst_half_image_{row['smoothing']}_rapd_index"
        scatter = list(csv.DictReader(open(tmp_path / f"scatter_{tag}.csv")))
        scores = [float(s["score"]) for s in scatter]
        labels = [s["label"] == "rapd_positive" for s in scatter]
        assert float(row["threshold"]) == pytest.approx(select_threshold(scores, labels), abs=1e-12)
        assert sorted(s["case_id"] for s in scatter) == [s["case_id"] for s in scatter]


def test_evaluate_reproducible_bytes(tiny_corpus, tmp_path):
    for sub in ("a", "b"):
        code = main([
            "evaluate", "--corpus", str(tiny_corpus), "--localizers", "starburst",
            "--out", str(tmp_path / sub),
        ])
        assert code == 0
    assert (tmp_path / "a" / "benchmark.csv").read_bytes() == (tmp_path / "b" / "benchmark.csv").read_bytes()


def test_train_baseline_rejects_zero_epochs(tiny_corpus, tmp_path):
    code = main([
        "train-baseline", "--corpus", str(tiny_corpus), "--epochs", "0",
        "--out", str(tmp_path),
    ])
    assert code == 2


def test_train_baseline_deterministic_weights(tiny_corpus, tmp_path):
    for sub in ("a", "b"):
        code = main([
            "train-baseline", "--corpus", str(tiny_corpus), "--epochs", "3",
            "--frame-stride", "30", "--seed", "5",
            "--weights", str(tmp_path / f"{sub}.json"), "--out", str(tmp_path),
        ])
        assert code == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_config_file_with_flag_override(tiny_corpus, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"localizer": "starburst", "threshold": 0.9, "out": str(tmp_path)}))
    code = main([
        "assess", "--case", str(tiny_corpus / "case000"),
        "--config", str(config), "--threshold", "0.25",
    ])
    assert code == 0
    result = json.loads((tmp_path / "case000_assessment.json").read_text())
    assert result["threshold"] == 0.25  # flag beats config file


def test_output_dir_environment_variable(tiny_corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("RAPDSCREEN_OUTPUT_DIR", str(tmp_path / "envout"))
    code = main(["assess", "--case", str(tiny_corpus / "case000"), "--localizer", "starburst"])
    assert code == 0
    assert (tmp_path / "envout" / "case000_assessment.json").exists()


def test_patch_localizer_requires_classifier(tiny_corpus):
    assert main(["assess", "--case", str(tiny_corpus / "case000"), "--localizer", "patch"]) == 2
