"""Command line: ``occur run | audit | sweep``.

Exit codes: 0 success / all conserved, 1 some verdict violated, 2 invalid
input or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .audit import audit_trajectories, born_residual_sweep, first_definition_current, lhs_current_series
from .errors import CapacityError, NumericError, OccurError, RangeError, ShapeError, ValidationError
from .generators import Generator
from .propagate import expectation_series, propagate_exact, propagate_reduced, rhs_current_series
from .scenario import atomic_write, bundled_path, bundled_scenarios, load_scenario
from .model import commutes_with_interaction

log = logging.getLogger("occur")

EXIT_OK, EXIT_VIOLATED, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(x) -> str:
    return "%.17g" % x


def _resolve(path: str) -> str:
    if os.path.exists(path):
        return path
    candidate = bundled_path(os.path.basename(path))
    return candidate if os.path.exists(candidate) else path


def _propagate(sc):
    gen = Generator(sc.system, sc.generator)
    cfg = sc.integrator_config(gen)
    red = propagate_reduced(sc.system, gen, sc.initial_reduced(), cfg)
    ex = propagate_exact(sc.system, sc.env, sc.initial_full(), cfg) if sc.env is not None else None
    return red, ex


def run_table(sc):
    """Header and rows of the trajectory CSV."""
    red, ex = _propagate(sc)
    header = ["t"]
    cols = [red.times]
    for obs in sc.observables:
        rhs = rhs_current_series(red, obs)
        commuting = all(commutes_with_interaction(sc.system, sc.env, obs.at(t)) for t in (0.0, red.times[-1]))
        header += [f"{obs.name}_exp", f"{obs.name}_current", f"{obs.name}_diss_rhs"]
        cols += [expectation_series(red, obs), first_definition_current(red, obs, rhs, commuting), rhs]
        if ex is not None:
            header.append(f"{obs.name}_diss_lhs")
            cols.append(lhs_current_series(ex, sc.system.couplings, sc.env.bath_ops, obs))
    return header, np.column_stack(cols)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def cmd_run(args) -> int:
    sc = load_scenario(_resolve(args.scenario))
    header, rows = run_table(sc)
    atomic_write(args.out, _csv(header, rows))
    log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    sc = load_scenario(_resolve(args.scenario))
    red, ex = _propagate(sc)
    reports = [audit_trajectories(sc, obs, red, ex) for obs in sc.observables]
    doc = {"scenario": sc.name, "generator": sc.generator.variant, "reports": [r.to_dict(series=args.series) for r in reports]}
    atomic_write(args.out, json.dumps(doc, indent=1) + "\n")
    for r in reports:
        log.info("%s: %s (max|rhs|=%.3e, gap=%.3e)", r.observable, r.verdict, r.max_abs_rhs, r.integral_gap)
    return EXIT_OK if all(r.conserved for r in reports) else EXIT_VIOLATED


def _parse_values(text: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValidationError("no coupling values given", "--values")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ValidationError(f"not a number list: {text!r}", "--values") from exc


def cmd_sweep(args) -> int:
    if args.param != "coupling":
        raise ValidationError(f"unsupported sweep parameter {args.param!r}", "--param")
    values = _parse_values(args.values)
    sc = load_scenario(_resolve(args.scenario))
    obs = sc.observable(args.observable)
    rows = born_residual_sweep(sc, obs, values)
    atomic_write(args.out, _csv(["g", "max_residual"], rows))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="occur", description="Open-system dynamics with operator-current conservation audits")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="propagate a scenario and write a trajectory CSV")
    r.add_argument("scenario")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="audit current conservation; exit 1 on violation")
    a.add_argument("scenario")
    a.add_argument("--out", required=True)
    a.add_argument("--series", action="store_true", help="include time series in the report")
    a.set_defaults(func=cmd_audit)

    s = sub.add_parser("sweep", help="residual between the two dissipative currents vs coupling")
    s.add_argument("scenario")
    s.add_argument("--param", default="coupling")
    s.add_argument("--values", required=True, help="comma-separated coupling scales")
    s.add_argument("--observable", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ShapeError, RangeError, CapacityError) as exc:
        print(f"occur: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as exc:
        print(f"occur: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"occur: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OccurError as exc:
        print(f"occur: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
