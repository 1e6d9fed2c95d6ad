#!/usr/bin/env python3
"""Observed RK4 order on the secular two-level scenario from step halving."""

import argparse
import math

import numpy as np

from occur.generators import Generator
from occur.propagate import IntegratorConfig, propagate_reduced
from occur.scenario import bundled_path, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, default=0.5)
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args()

    sc = load_scenario(bundled_path("twolevel_secular.json"))
    gen = Generator(sc.system, sc.generator)
    runs = []
    for k in range(args.levels):
        cfg = IntegratorConfig(args.dt / 2**k, sc.t_final, 2**k)
        runs.append(propagate_reduced(sc.system, gen, sc.initial_reduced(), cfg).states)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(runs, runs[1:])]
    for k in range(len(diffs) - 1):
        print(f"dt={args.dt / 2**k:<9g} diff={diffs[k]:.3e}  order={math.log2(diffs[k] / diffs[k + 1]):.3f}")


if __name__ == "__main__":
    main()
