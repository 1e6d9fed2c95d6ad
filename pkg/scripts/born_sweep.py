#!/usr/bin/env python3
"""Residual between interaction-side and generator-side currents versus coupling.

Prints the residual and the ratio between successive halvings of g. Scaling
every coupling by g puts the Redfield rates at g^2, so a ratio near 4 is
the expected leading behaviour.
"""

import argparse

from occur.audit import born_residual_sweep
from occur.scenario import bundled_path, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", default="qubit_qubit_sweep.json")
    ap.add_argument("--g-max", type=float, default=0.4)
    ap.add_argument("--halvings", type=int, default=6)
    args = ap.parse_args()

    sc = load_scenario(bundled_path(args.scenario))
    values = [args.g_max / 2**k for k in range(args.halvings)]
    rows = born_residual_sweep(sc, sc.observable(), values)
    prev = None
    print(f"{'g':>10} {'max residual':>14} {'ratio':>8}")
    for g, res in rows:
        ratio = f"{prev / res:8.3f}" if prev and res else f"{'':>8}"
        print(f"{g:10.5f} {res:14.6e} {ratio}")
        prev = res


if __name__ == "__main__":
    main()
