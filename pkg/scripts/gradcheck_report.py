#!/usr/bin/env python3
"""Print a finite-difference verification table for every layer kind.

    python scripts/gradcheck_report.py --trials 5 --seed 7
"""

import argparse
import sys

import numpy as np

from strokedet.gradcheck import LAYER_KINDS, gradient_check, random_toy_shape


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epsilon", type=float, default=1e-4)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'layer kind':<24}{'shape':<18}{'max rel error':>14}")
    worst_overall = 0.0
    for kind in LAYER_KINDS:
        for trial in range(args.trials):
            shape = random_toy_shape(kind, rng)
            err = gradient_check(kind, shape, seed=args.seed + trial, epsilon=args.epsilon)
            worst_overall = max(worst_overall, err)
            print(f"{kind:<24}{str(shape):<18}{err:>14.3e}")
    print(f"\nworst overall: {worst_overall:.3e} (tolerance 1e-5)")
    return 0 if worst_overall < 1e-5 else 1


if __name__ == "__main__":
    sys.exit(run())
