"""Command line entry point: ``dplab <kind> --config FILE`` and friends.

Exit codes: 0 when every check passes, 1 when a property check fails,
2 on config, budget or input errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from fractions import Fraction

from . import qe
from .formula import format_formula, free_vars
from .ict import BudgetError
from .parser import ParseError, parse
from .runner import (
    KINDS, SCHEMA_VERSION, WORKERS_ENV, ConfigError, CorruptReport, load_config, replay, run,
    validate_config,
)
from .semantics import UnsupportedFormula, evaluate
from .structures import LexPoint, QLexGroup

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _set_value(text):
    key, sep, raw = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dplab", description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=None,
                    help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a config file, whatever its kind")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="directory for report and CSV files")

    p = sub.add_parser("replay", help="re-run a report's config and diff the tables")
    p.add_argument("report")

    for kind in KINDS:
        if kind == "qe":
            continue
        p = sub.add_parser(kind, help=f"{kind} experiment")
        p.add_argument("--config", help="config file; its values override flags")
        p.add_argument("--set", action="append", type=_set_value, default=[], metavar="KEY=JSON",
                       help="config field given on the command line")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default=None)

    p = sub.add_parser("qe", help="eliminate quantifiers in a qlex formula, or run the rule corpus")
    p.add_argument("formula", nargs="?", help="formula over <, =, +, f and pair constants")
    p.add_argument("--rule", choices=sorted(qe.RULES), default="validated")
    p.add_argument("--oracle-grid", type=int, default=3, metavar="N",
                   help="check free variables over pairs with N integer coordinates around 0")
    p.add_argument("--config")
    p.add_argument("--set", action="append", type=_set_value, default=[], metavar="KEY=JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None)
    return ap


def _merged_config(kind, args) -> dict:
    cfg = {"schema_version": SCHEMA_VERSION, "kind": kind}
    if args.seed is not None:
        cfg["seed"] = args.seed
    for key, value in args.set:
        cfg[key] = value
    if args.config:
        file_cfg = load_config(args.config)
        if file_cfg["kind"] != kind:
            raise ConfigError(f"config kind {file_cfg['kind']!r} does not match subcommand {kind!r}")
        cfg.update(file_cfg)
    return validate_config(cfg)


def _emit(report, out):
    print(report.summary())
    for name, table in report.tables.items():
        print(f"-- {name}")
        print(table.csv_body(), end="")
    if out:
        for path in report.write(out):
            print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _oracle_grid(n):
    coords = [Fraction(i - (n - 1) // 2) for i in range(n)]
    return [LexPoint(a, b) for a in coords for b in coords]


def _qe_formula(args) -> int:
    phi = parse(args.formula, QLexGroup.signature)
    out = qe.eliminate_all(phi, args.rule)
    print(format_formula(out))
    names = sorted(free_vars(phi))
    grid = _oracle_grid(args.oracle_grid)
    struct = QLexGroup()
    total = bad = 0
    for combo in itertools.product(grid, repeat=len(names)):
        env = dict(zip(names, combo))
        total += 1
        if evaluate(struct, phi, env) != evaluate(struct, out, env):
            bad += 1
            if bad <= 5:
                where = ", ".join(f"{k}={v}" for k, v in env.items()) or "(no free variables)"
                print(f"disagreement at {where}")
    print(f"oracle agreement: {total - bad}/{total} assignments ({args.rule} rule)")
    return EXIT_OK if bad == 0 else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _emit(run(load_config(args.config), args.workers), args.out)
        if args.command == "replay":
            fresh, diffs = replay(args.report, args.workers)
            for d in diffs:
                print(d)
            print(f"replay: {len(diffs)} difference(s)")
            return EXIT_OK if not diffs else EXIT_FAIL
        if args.command == "qe" and args.formula:
            return _qe_formula(args)
        return _emit(run(_merged_config(args.command, args), args.workers), args.out)
    except (ConfigError, BudgetError, CorruptReport, ParseError, UnsupportedFormula) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
