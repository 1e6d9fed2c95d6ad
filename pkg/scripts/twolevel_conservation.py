#!/usr/bin/env python3
"""Audit the two-level relaxation example under each generator and print a table."""

import argparse

from occur.audit import audit_conservation
from occur.linalg import PAULI_Z
from occur.model import ObservableSpec
from occur.scenario import bundled_path, load_scenario

NAMES = ("twolevel_secular", "twolevel_redfield", "twolevel_singular")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--with-sz", action="store_true", help="also audit the noncommuting observable sz")
    args = ap.parse_args()

    print(f"{'scenario':<20} {'obs':<4} {'commuting':<9} {'max|TrDG|':>11} {'int I dt':>11} {'delta<G>':>11} {'verdict':>9}")
    for name in NAMES:
        sc = load_scenario(bundled_path(name + ".json"))
        observables = [sc.observable()]
        if args.with_sz:
            observables.append(ObservableSpec("sz", PAULI_Z))
        for obs in observables:
            r = audit_conservation(sc, obs)
            print(
                f"{name:<20} {obs.name:<4} {str(r.commuting_flag):<9} {r.max_abs_rhs:11.3e} "
                f"{r.integrated_current:11.3e} {r.observable_change:11.6f} {r.verdict:>9}"
            )


if __name__ == "__main__":
    main()
