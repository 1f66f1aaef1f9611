"""
Command-line front end.

    potflow run --config airfoil_incompressible_sphere --out-dir out/
    potflow sweep --config nozzle_radial_gamma14 --parameter mesh.size --values 32 64 128
    potflow list-configs

Exit status: 0 all checks pass, 1 a check failed, 2 config error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment
from .errors import ConfigurationError, LinearSolveError, NonConvergenceError, NotSubsonicError


def _parse_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def build_parser():
    p = argparse.ArgumentParser(prog="potflow", description="Far-field experiments for subsonic potential flow.")
    p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve and run the configured checks")
    run.add_argument("--config", required=True, help="TOML file or bundled config name")
    run.add_argument("--out-dir", default=None, help="directory for report.json and CSV files")

    sw = sub.add_parser("sweep", help="repeat an experiment over values of one config key")
    sw.add_argument("--config", required=True)
    sw.add_argument("--parameter", required=True, help="dotted key, e.g. flow.mach or mesh.size")
    sw.add_argument("--values", nargs="*", default=[], help="values to sweep")
    sw.add_argument("--out-dir", default=None)
    sw.add_argument("--workers", type=int, default=1, help="parallel sub-runs")

    sub.add_parser("list-configs", help="list bundled configs")
    return p


def _print_checks(report, stream):
    for rec in report["checks"]:
        val = rec.get("value")
        extra = f" value={val:.6g}" if isinstance(val, float) else ""
        stream.write(f"{'PASS' if rec['passed'] else 'FAIL'}  {rec['check']}{extra}\n")
    stream.write(f"{report['name']}: {'PASS' if report['passed'] else 'FAIL'}\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "list-configs":
            for path in experiment.bundled_configs():
                print(path.stem)
            return experiment.EXIT_OK
        if args.command == "run":
            report, status = experiment.run_config(args.config, args.out_dir)
            _print_checks(report, sys.stdout)
            return status
        values = [_parse_value(v) for v in args.values]
        rows = experiment.sweep(args.config, args.parameter, values, args.out_dir, max(1, args.workers))
        for row in rows:
            print(json.dumps(row, default=str))
        return experiment.EXIT_OK if all(r["passed"] for r in rows) else experiment.EXIT_CHECK_FAILED
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return experiment.EXIT_CONFIG
    except (NonConvergenceError, NotSubsonicError, LinearSolveError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return experiment.EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
