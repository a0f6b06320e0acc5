"""Glue between files and the processing stages.

`materialize_dataset` turns raw runs plus run-frame events into the on-disk
training dataset: gap-interpolated, windowed, min-max normalized inputs; run
-level smoothed targets sliced per window; window-relative ground-truth
events; and the subject-aware split plan. Arrays live in a deterministic
binary container, metadata in sorted-keys JSON, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import labels as lb
from . import runs as rn
from .config import PipelineConfig
from .errors import ConfigError, DataError
from .weights_io import load_arrays, save_arrays

DATASET_BIN = "windows.bin"
DATASET_META = "windows.meta.json"
SPLIT_FILE = "split.json"
MANIFEST = "manifest.json"

KIND_FROM_SIGN = {1.0: lb.ONSET, -1.0: lb.ENDING}


@dataclass
class WindowDataset:
    X: np.ndarray  # (n_windows, window_length) normalized inputs
    Y: np.ndarray  # (n_windows, window_length) smoothed targets
    meta: list  # per window: {"run_id", "athlete_id", "start"}
    events: list  # per window: [EventLabel, ...] window-relative
    split: rn.SplitPlan
    window_length: int
    window_stride: int

    def indices_for(self, labels_wanted) -> list:
        wanted = set(labels_wanted)
        return [
            i for i, m in enumerate(self.meta)
            if self.split.assignments.get(m["athlete_id"]) in wanted
        ]

    def partition_indices(self, partition: str, val_fold: int | None = None) -> list:
        """'holdout', 'fold<i>', 'train' (all folds), or 'train_minus_val'."""
        if partition == rn.HOLDOUT:
            return self.indices_for([rn.HOLDOUT])
        folds = [f"fold{i}" for i in range(self.split.n_folds)]
        if partition == "train":
            return self.indices_for(folds)
        if partition == "train_minus_val":
            if val_fold is None:
                raise ConfigError("train_minus_val needs a validation fold")
            return self.indices_for([f for f in folds if f != f"fold{val_fold}"])
        if partition in folds:
            return self.indices_for([partition])
        raise ConfigError(f"unknown partition {partition!r}")


def write_synth_manifest(out_dir, cfg: PipelineConfig, entries, created_at: str) -> dict:
    """Manifest for a generated dataset; `digest` covers file contents only
    (created_at is the single non-reproducible field)."""
    sha = hashlib.sha256()
    for entry in sorted(entries, key=lambda e: e["run_csv"]):
        for key in ("run_csv", "events"):
            sha.update((Path(out_dir) / entry[key]).read_bytes())
    manifest = {
        "created_at": created_at,
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "files": sorted(entries, key=lambda e: e["run_csv"]),
        "digest": sha.hexdigest(),
    }
    path = Path(out_dir) / MANIFEST
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def load_runs_dir(data_dir):
    """Read every run CSV plus its events file; boat types come from the manifest."""
    data_dir = Path(data_dir)
    boat_types = {}
    manifest_path = data_dir / MANIFEST
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        boat_types = {e["run_id"]: e["boat_type"] for e in manifest.get("files", [])}
    pairs = []
    run_paths = sorted(data_dir.glob("run*_ath*.csv"))
    if not run_paths:
        raise DataError(f"{data_dir}: no run CSV files found")
    for path in run_paths:
        run = rn.read_run_csv(path)
        if run.run_id in boat_types:
            run.boat_type = boat_types[run.run_id]
        events_path = path.with_suffix("").with_name(path.stem + ".events.jsonl")
        if not events_path.exists():
            raise DataError(f"{events_path}: missing events file for {path.name}")
        frame, events = lb.read_events_jsonl(events_path)
        if frame != "run":
            raise DataError(f"{events_path}: expected run-frame events, got {frame!r}")
        pairs.append((run, events))
    return pairs


def materialize_dataset(run_event_pairs, cfg: PipelineConfig) -> WindowDataset:
    split = rn.subject_aware_split(
        [run for run, _ in run_event_pairs], cfg.n_folds, cfg.holdout_fraction, cfg.seed
    )
    xs, ys, meta, window_events = [], [], [], []
    for run, events in run_event_pairs:
        filled = rn.interpolate_gaps(run)
        target_full = lb.smooth_events(
            events, len(filled), cfg.label_kernel_window, cfg.label_sigma
        )
        for window in rn.slide_windows(filled, cfg.window_length, cfg.window_stride):
            xs.append(rn.minmax_normalize(window.values))
            ys.append(target_full[window.start:window.start + cfg.window_length])
            meta.append({
                "run_id": window.run_id,
                "athlete_id": window.athlete_id,
                "start": window.start,
            })
            window_events.append([
                lb.EventLabel(t=ev.t - window.start, kind=ev.kind)
                for ev in events
                if window.start <= ev.t < window.start + cfg.window_length
            ])
    if not xs:
        raise DataError("no windows produced; runs shorter than the window length?")
    return WindowDataset(
        X=np.stack(xs),
        Y=np.stack(ys),
        meta=meta,
        events=window_events,
        split=split,
        window_length=cfg.window_length,
        window_stride=cfg.window_stride,
    )


def save_dataset(ds: WindowDataset, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ev_window, ev_t, ev_sign = [], [], []
    for w, events in enumerate(ds.events):
        for ev in events:
            ev_window.append(w)
            ev_t.append(ev.t)
            ev_sign.append(lb.KIND_SIGNS[ev.kind])
    save_arrays(out_dir / DATASET_BIN, {
        "X": ds.X,
        "Y": ds.Y,
        "start": np.asarray([m["start"] for m in ds.meta], dtype=np.float64),
        "event_window": np.asarray(ev_window, dtype=np.float64),
        "event_t": np.asarray(ev_t, dtype=np.float64),
        "event_sign": np.asarray(ev_sign, dtype=np.float64),
    })
    meta = {
        "window_length": ds.window_length,
        "window_stride": ds.window_stride,
        "windows": [
            {"run_id": m["run_id"], "athlete_id": m["athlete_id"], "start": m["start"]}
            for m in ds.meta
        ],
    }
    (out_dir / DATASET_META).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    rn.write_split_json(ds.split, out_dir / SPLIT_FILE)


def load_dataset(data_dir) -> WindowDataset:
    data_dir = Path(data_dir)
    for name in (DATASET_BIN, DATASET_META, SPLIT_FILE):
        if not (data_dir / name).exists():
            raise DataError(f"{data_dir}: missing {name}; run the preprocess command first")
    arrays = load_arrays(data_dir / DATASET_BIN)
    meta = json.loads((data_dir / DATASET_META).read_text())
    split = rn.read_split_json(data_dir / SPLIT_FILE)
    n = arrays["X"].shape[0]
    events = [[] for _ in range(n)]
    for w, t, sign in zip(arrays["event_window"], arrays["event_t"], arrays["event_sign"]):
        events[int(w)].append(lb.EventLabel(t=int(t), kind=KIND_FROM_SIGN[float(sign)]))
    return WindowDataset(
        X=arrays["X"],
        Y=arrays["Y"],
        meta=meta["windows"],
        events=events,
        split=split,
        window_length=int(meta["window_length"]),
        window_stride=int(meta["window_stride"]),
    )


def window_name(meta_entry: dict) -> str:
    return f"run{meta_entry['run_id']}:{meta_entry['start']}"
