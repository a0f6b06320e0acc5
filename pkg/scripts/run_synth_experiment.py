#!/usr/bin/env python3
"""End-to-end synthetic experiment: generate, preprocess, train, evaluate.

Runs the full pipeline in one process and prints the holdout metrics next to
the label-oracle reference. Useful as a quick quality check after changes:

    python scripts/run_synth_experiment.py --workdir /tmp/exp --epochs 10
"""

import argparse
import sys
from pathlib import Path

from strokedet.cli import main as cli


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", required=True, type=Path)
    parser.add_argument("--arch", default="gruc1")
    parser.add_argument("--epochs", type=int, default=35)
    parser.add_argument("--athletes", type=int, default=24)
    parser.add_argument("--run-duration", type=float, default=22.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    n_folds = min(5, max(2, args.athletes - 2))
    overrides = []
    for kv in (
        f"n_athletes={args.athletes}",
        "runs_per_athlete=1",
        f"run_duration={args.run_duration}",
        "stroke_rate_min=45", "stroke_rate_max=115",
        f"n_folds={n_folds}",
        f"epochs={args.epochs}",
        "learning_rate=0.002",
        f"seed={args.seed}",
        f"arch={args.arch}",
    ):
        overrides.extend(["--set", kv])

    raw = args.workdir / "raw"
    data = args.workdir / "data"
    weights = args.workdir / f"{args.arch}.bin"

    steps = [
        ["synth"] + overrides + ["--out", str(raw)],
        ["preprocess"] + overrides + ["--data", str(raw), "--out", str(data)],
        ["train"] + overrides + ["--data", str(data), "--weights", str(weights),
                                 "--history", str(args.workdir / "history.csv")],
        ["evaluate"] + overrides + ["--data", str(data), "--weights", str(weights),
                                    "--out", str(args.workdir / "eval_model")],
        ["evaluate"] + overrides + ["--data", str(data), "--predict-from-labels",
                                    "--out", str(args.workdir / "eval_oracle")],
    ]
    for step in steps:
        print(f"== strokedet {step[0]} ==")
        code = cli(step)
        if code != 0:
            return code
    print(f"\nreports under {args.workdir}: eval_model/, eval_oracle/, history.csv")
    return 0


if __name__ == "__main__":
    sys.exit(run())
