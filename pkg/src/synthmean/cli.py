"""Command-line interface.

    synthmean validate  --cohort c.csv [--reference r.csv]
    synthmean estimate  --cohort c.csv --reference r.csv [--methods ...]
    synthmean bounds    --cohort c.csv [--bounds 70 120]
    synthmean diagnose  --cohort c.csv --reference r.csv
    synthmean simulate  --reference r.csv --ages 2 3 --n 20000
    synthmean figures   --cohort c.csv --reference r.csv
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .cohort import GENDERS, ensure_height_percentiles
from .errors import SynthMeanError
from .reference import read_reference_table
from .report import (
    OUT_DIR_ENV,
    RunConfig,
    atomic_write,
    cohort_summary,
    csv_text,
    emit_diagnostic,
    emit_figure_data,
    emit_table1,
    load_inputs,
    run_analysis,
    simulate_rows,
    table1_text,
)

log = logging.getLogger("synthmean")

# CLI flag -> RunConfig field, for flags that override a --config file
_OVERRIDES = (
    "cohort", "reference", "delimiter", "cutoff", "age_range", "methods", "replicates",
    "seed", "bounds", "draws_per_participant", "workers", "dump_replicates",
)


def _shared(p):
    p.add_argument("--config", help="JSON run configuration (e.g. the 'config' block of a report)")
    p.add_argument("--cohort", required=False, help="cohort CSV")
    p.add_argument("--reference", help="reference table CSV")
    p.add_argument("--mapping", help="JSON column mapping")
    p.add_argument("--delimiter", default=None)
    p.add_argument("--cutoff", type=int, default=None, help="positivity cutoff age (default 8)")
    p.add_argument("--age-range", dest="age_range", type=int, nargs=2, metavar=("MIN", "MAX"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("--draws-per-participant", dest="draws_per_participant", type=int, default=None)
    p.add_argument("--drop-missing-height", action="store_true", default=None)
    p.add_argument("--out-dir", dest="out_dir", default=None,
                   help=f"output directory (default ${OUT_DIR_ENV} or ./synthmean_out)")
    p.add_argument("--dump-replicates", dest="dump_replicates", default=None,
                   help="write bootstrap replicate values as single-column CSV")


def build_parser():
    parser = argparse.ArgumentParser(prog="synthmean", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"synthmean {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse the cohort and print the ingest report and age table")
    _shared(p)

    p = sub.add_parser("estimate", help="bootstrap point estimates and write report.json")
    _shared(p)
    p.add_argument("--methods", nargs="+", default=None,
                   help="any of complete_case gcomp_linear gcomp_saturated synthesis bounds diagnostic")

    p = sub.add_parser("bounds", help="plug-in bounds for the overall mean")
    _shared(p)

    p = sub.add_parser("diagnose", help="positive-region comparison of statistical and reference models")
    _shared(p)

    p = sub.add_parser("simulate", help="draws from reference strata as CSV")
    p.add_argument("--reference", required=True)
    p.add_argument("--ages", type=int, nargs="+", required=True)
    p.add_argument("--genders", nargs="+", choices=GENDERS, default=list(GENDERS))
    p.add_argument("--percentile", type=float, default=50.0)
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="CSV path (default stdout)")

    p = sub.add_parser("figures", help="plot data: observed points, model curves, simulated draws")
    _shared(p)
    p.add_argument("--n-draws", dest="n_draws", type=int, default=20_000)
    p.add_argument("--sim-ages", dest="sim_ages", type=int, nargs="+", default=None)
    return parser


def config_from_args(args, methods=None):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    else:
        base = {}
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    if args.drop_missing_height:
        base["drop_missing_height"] = True
    if args.mapping:
        with open(args.mapping, encoding="utf-8") as fh:
            base["mapping"] = json.load(fh)
    if methods is not None:
        base["methods"] = methods
    if "cohort" not in base:
        raise SynthMeanError("a cohort file is required (--cohort or --config)")
    base.setdefault("seed", 0)
    return RunConfig.from_dict(base)


def out_dir(args):
    d = args.out_dir or os.environ.get(OUT_DIR_ENV) or "synthmean_out"
    return Path(d)


def cmd_validate(args):
    config = config_from_args(args, methods=[])
    config.validate()
    cohort, table = load_inputs(config)
    summary = cohort_summary(cohort)
    if table is not None:
        neg = ~cohort.positive
        table.require(cohort.age[neg], cohort.gender[neg])
        ensure_height_percentiles(cohort)
        summary["reference_strata"] = len(table.coverage)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _run_and_write(args, config):
    out = out_dir(args)
    report = run_analysis(config)
    text = report.to_json()
    # everything computed before anything is written
    atomic_write(out / "report.json", text)
    atomic_write(out / "ingest.json", json.dumps(report.cohort["ingest"], sort_keys=True, indent=2) + "\n")
    atomic_write(out / "table1.csv", table1_text(report.cohort["table1"]))
    if report.diagnostic is not None:
        emit_diagnostic(report.diagnostic["rows"], out / "diagnostic.csv")
    sys.stdout.write(text)
    for w in report.warnings:
        log.warning(w)
    return report


def cmd_estimate(args):
    methods = None
    if args.methods is None and not args.config:
        methods = ["complete_case", "gcomp_linear", "bounds"]
        if args.reference:
            methods.insert(2, "synthesis")
    elif args.methods is not None:
        methods = args.methods
    _run_and_write(args, config_from_args(args, methods=methods))
    return 0


def cmd_bounds(args):
    _run_and_write(args, config_from_args(args, methods=["bounds"]))
    return 0


def cmd_diagnose(args):
    _run_and_write(args, config_from_args(args, methods=["diagnostic"]))
    return 0


def cmd_simulate(args):
    table = read_reference_table(args.reference)
    rows = simulate_rows(table, args.ages, args.genders, args.percentile, args.n, args.seed)
    text = csv_text(["age", "gender", "bracket", "value"], rows)
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_figures(args):
    config = config_from_args(args, methods=[])
    config.validate()
    cohort, table = load_inputs(config)
    out = out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    paths = emit_figure_data(cohort, table, path_prefix=f"{out}{os.sep}", n_draws=args.n_draws,
                             seed=config.seed, ages=args.sim_ages)
    emit_table1(cohort, out / "table1.csv")
    print(json.dumps({"written": paths + [str(out / "table1.csv")]}, indent=2))
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "estimate": cmd_estimate,
    "bounds": cmd_bounds,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
    "figures": cmd_figures,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SynthMeanError, OSError, ValueError, csv.Error) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
