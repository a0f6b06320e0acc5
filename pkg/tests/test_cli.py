"""End-to-end CLI runs on a miniature synthetic dataset."""

import json
from pathlib import Path

import numpy as np
import pytest

from strokedet.cli import main

TINY = [
    "n_athletes=4", "runs_per_athlete=1", "run_duration=7",
    "stroke_rate_min=55", "stroke_rate_max=95",
    "n_folds=2", "holdout_fraction=0.25",
    "epochs=2", "batch_size=8", "seed=0",
]


def tiny_args(extra):
    args = []
    for kv in TINY:
        args.extend(["--set", kv])
    return args + extra


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    raw = root / "raw"
    data = root / "data"
    assert main(["synth"] + tiny_args(["--out", str(raw)])) == 0
    assert main(["preprocess"] + tiny_args(["--data", str(raw), "--out", str(data)])) == 0
    return root


def test_synth_writes_manifest_and_runs(workspace):
    raw = workspace / "raw"
    manifest = json.loads((raw / "manifest.json").read_text())
    assert len(manifest["files"]) == 4
    for entry in manifest["files"]:
        assert (raw / entry["run_csv"]).exists()
        assert (raw / entry["events"]).exists()
    assert manifest["digest"]


def test_synth_same_seed_same_digest(workspace, tmp_path):
    again = tmp_path / "again"
    assert main(["synth"] + tiny_args(["--out", str(again)])) == 0
    d1 = json.loads((workspace / "raw" / "manifest.json").read_text())["digest"]
    d2 = json.loads((again / "manifest.json").read_text())["digest"]
    assert d1 == d2


def test_preprocess_outputs(workspace):
    data = workspace / "data"
    assert (data / "windows.bin").exists()
    assert (data / "windows.meta.json").exists()
    split = json.loads((data / "split.json").read_text())
    assert len(split["assignments"]) == 4


def test_train_count_only(capsys):
    assert main(["train", "--arch", "cnn_dense", "--count-only"]) == 0
    assert capsys.readouterr().out.strip() == "513,317,544"


def test_train_and_weights(workspace):
    data = workspace / "data"
    weights = workspace / "gruc1.bin"
    history = workspace / "history.csv"
    code = main(["train"] + tiny_args([
        "--data", str(data), "--weights", str(weights), "--history", str(history),
    ]))
    assert code == 0
    assert weights.exists()
    lines = history.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert len(lines) == 3  # header + 2 epochs


def test_train_determinism(workspace, tmp_path):
    data = workspace / "data"
    w2 = tmp_path / "again.bin"
    assert main(["train"] + tiny_args(["--data", str(data), "--weights", str(w2)])) == 0
    assert w2.read_bytes() == (workspace / "gruc1.bin").read_bytes()


def test_predict_writes_detections(workspace):
    data = workspace / "data"
    out = workspace / "dets.jsonl"
    code = main(["predict"] + tiny_args([
        "--data", str(data), "--predict-from-labels", "--out", str(out),
    ]))
    assert code == 0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert any("window" in obj for obj in lines)
    assert any("t" in obj for obj in lines)


def test_evaluate_oracle_mode(workspace, capsys):
    data = workspace / "data"
    out = workspace / "eval"
    code = main(["evaluate"] + tiny_args([
        "--data", str(data), "--predict-from-labels", "--out", str(out),
    ]))
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["f1"] >= 0.99
    assert metrics["k"] == 15 and metrics["h"] == 15
    hist_lines = (out / "histogram.csv").read_text().splitlines()
    assert hist_lines[0] == "bucket_low,bucket_high,count"
    assert len(hist_lines) == 1 + 15 + 1  # header + k buckets + exact-hit bucket
    # histogram mass = matched pairs + unmatched restricted entities
    counts = sum(int(line.split(",")[2]) for line in hist_lines[1:])
    assert counts > 0


def test_evaluate_determinism(workspace, tmp_path):
    data = workspace / "data"
    out2 = tmp_path / "eval2"
    assert main(["evaluate"] + tiny_args([
        "--data", str(data), "--predict-from-labels", "--out", str(out2),
    ])) == 0
    assert (out2 / "metrics.json").read_bytes() == (workspace / "eval" / "metrics.json").read_bytes()
    assert (out2 / "histogram.csv").read_bytes() == (workspace / "eval" / "histogram.csv").read_bytes()


def test_evaluate_with_trained_model(workspace):
    data = workspace / "data"
    out = workspace / "eval_model"
    code = main(["evaluate"] + tiny_args([
        "--data", str(data), "--weights", str(workspace / "gruc1.bin"), "--out", str(out),
    ]))
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    for key in ("precision", "recall", "f1"):
        assert metrics[key] is None or 0.0 <= metrics[key] <= 1.0


def test_crossval_report(workspace):
    data = workspace / "data"
    out = workspace / "cv"
    code = main(["crossval"] + tiny_args(["--data", str(data), "--out", str(out)]))
    assert code == 0
    lines = (out / "crossval.csv").read_text().splitlines()
    assert lines[0] == "fold,architecture,precision,recall,f1,n_parameters"
    assert len(lines) == 1 + 2 + 1  # header + 2 folds + mean
    assert all(line.split(",")[5] == "37889" for line in lines[1:])
    assert (out / "crossval.txt").read_text().count("GRUc1") == 3


def test_arch_table(capsys):
    assert main(["arch", "gruc1"]) == 0
    out = capsys.readouterr().out
    assert "GRUc1" in out and "37,889" in out
    assert "12,864" in out and "24,960" in out and "tanh" in out


def test_arch_all(capsys):
    assert main(["arch"]) == 0
    out = capsys.readouterr().out
    assert "513,317,544" in out and "990,209" in out


def test_unknown_architecture_exit_code():
    assert main(["train", "--arch", "transformer", "--count-only"]) == 2


def test_missing_dataset_exit_code(tmp_path):
    assert main(["evaluate", "--data", str(tmp_path / "nope"), "--predict-from-labels",
                 "--out", str(tmp_path / "o")]) == 3


def test_bad_config_key_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key = 1\n")
    assert main(["arch", "gruc1", "--config", str(cfg)]) == 2


def test_margin_inconsistency_exit_code(workspace, tmp_path):
    assert main(["evaluate"] + tiny_args([
        "--data", str(workspace / "data"), "--predict-from-labels",
        "--out", str(tmp_path / "o"), "--set", "margin_h=600",
    ])) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exit_code(workspace, tmp_path):
    # the dense-layer scale grows ~1e9x per SGD step at this rate; enough
    # steps overflow float64 into inf and trip the divergence guard
    assert main(["train"] + tiny_args([
        "--data", str(workspace / "data"), "--weights", str(tmp_path / "w.bin"),
        "--set", "learning_rate=1e9", "--set", "optimizer=sgd",
        "--set", "epochs=15", "--set", "batch_size=1",
    ])) == 4
