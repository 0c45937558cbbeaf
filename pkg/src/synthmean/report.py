"""End-to-end analysis: configuration, orchestration and file emission."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .cohort import GENDERS, ColumnMapping, ensure_height_percentiles, missingness_table, read_cohort
from .diagnostics import diagnostic_compare
from .estimators import (
    METHODS as ESTIMATOR_METHODS,
    EstimateResult,
    bound_mean,
    fit_linear_wls,
    fit_saturated,
    make_estimator,
    positive_region_mean,
    prop_nonpositive,
)
from .errors import DomainError
from .reference import nearest_bracket, read_reference_table, simulate_stratum
from .resampling import FIGURES, FULL_SAMPLE, ResamplePlan, bootstrap, substream, summarize

ALL_METHODS = ESTIMATOR_METHODS + ("bounds", "diagnostic")
OUT_DIR_ENV = "SYNTHMEAN_OUT_DIR"
# not part of the analysis; left out of the config echo so reports match across them
EXECUTION_FIELDS = ("workers", "out_dir", "dump_replicates")


@dataclass
class RunConfig:
    cohort: str
    reference: Optional[str] = None
    mapping: dict = field(default_factory=dict)
    delimiter: str = ","
    cutoff: int = 8
    age_range: tuple = (2, 17)
    methods: tuple = ("complete_case", "gcomp_linear", "synthesis", "bounds")
    replicates: int = 20_000
    seed: int = 0
    bounds: tuple = (70.0, 120.0)
    draws_per_participant: int = 100
    drop_missing_height: bool = False
    workers: int = 1
    out_dir: Optional[str] = None
    dump_replicates: Optional[str] = None

    def __post_init__(self):
        self.age_range = tuple(int(a) for a in self.age_range)
        self.bounds = tuple(float(b) for b in self.bounds)
        self.methods = tuple(self.methods)

    def validate(self):
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise DomainError(f"unknown method(s): {', '.join(unknown)}")
        if len(set(self.methods)) != len(self.methods):
            raise DomainError("methods listed more than once")
        if not os.path.isfile(self.cohort):
            raise FileNotFoundError(f"cohort file not found: {self.cohort}")
        if {"synthesis", "diagnostic"} & set(self.methods):
            if not self.reference:
                raise DomainError("synthesis and diagnostic need a reference table")
        if self.reference and not os.path.isfile(self.reference):
            raise FileNotFoundError(f"reference file not found: {self.reference}")
        if self.age_range[0] > self.age_range[1]:
            raise DomainError("age range is inverted")
        ResamplePlan(self.replicates, self.seed, self.workers)

    def echo(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in EXECUTION_FIELDS}
        d["age_range"] = list(self.age_range)
        d["bounds"] = list(self.bounds)
        d["methods"] = list(self.methods)
        d["mapping"] = dict(self.mapping)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config key(s): {', '.join(sorted(extra))}")
        return cls(**d)

    @property
    def plan(self):
        return ResamplePlan(self.replicates, self.seed, self.workers)


@dataclass
class AnalysisReport:
    config: dict
    cohort: dict
    estimates: dict
    bounds: Optional[dict] = None
    diagnostic: Optional[dict] = None
    warnings: list = field(default_factory=list)
    software: dict = field(default_factory=lambda: {"name": "synthmean", "version": __version__})

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def load_inputs(config):
    mapping = ColumnMapping.from_dict(config.mapping)
    cohort = read_cohort(
        config.cohort, mapping=mapping, cutoff=config.cutoff, age_range=config.age_range,
        delimiter=config.delimiter, drop_missing_height=config.drop_missing_height,
    )
    table = read_reference_table(config.reference) if config.reference else None
    return cohort, table


def cohort_summary(cohort):
    return {
        "n": len(cohort),
        "n_observed": int(cohort.observed.sum()),
        "prop_nonpositive": prop_nonpositive(cohort),
        "cutoff": cohort.cutoff,
        "ingest": cohort.ingest.to_dict() if cohort.ingest else None,
        "table1": missingness_table(cohort),
    }


def _dump_path(base, method, several):
    if not several:
        return base
    p = Path(base)
    return str(p.with_name(f"{p.stem}_{method}{p.suffix or '.csv'}"))


def run_analysis(config, cohort=None, table=None):
    """Run every requested method and return an :class:`AnalysisReport`.

    ``cohort``/``table`` may be passed pre-loaded; otherwise they are read
    from the paths in ``config``.
    """
    if cohort is None:
        config.validate()
        cohort, table = load_inputs(config)
    methods = list(config.methods)
    if {"synthesis", "diagnostic"} & set(methods):
        if table is None:
            raise DomainError("synthesis and diagnostic need a reference table")
        cohort = ensure_height_percentiles(cohort)
        if "synthesis" in methods:
            neg = ~cohort.positive
            table.require(cohort.age[neg], cohort.gender[neg])
        if "diagnostic" in methods:
            pos = cohort.positive
            table.require(cohort.age[pos], cohort.gender[pos])
    plan = config.plan
    estimates, warns = {}, []
    boot_methods = [m for m in methods if m in ESTIMATOR_METHODS]
    for m in boot_methods:
        est = make_estimator(m, table)
        full = est(cohort, substream(plan.seed, 0, FULL_SAMPLE))
        boot = bootstrap(cohort, est, plan)
        if boot.warning:
            warns.append(f"{m}: {boot.warning}")
        s = summarize(boot.values)
        estimates[m] = EstimateResult(
            method=m, point=s.median, ci=(s.p2_5, s.p97_5), replicates=plan.replicates,
            seed=plan.seed, sd=s.sd, full_sample=full, failures=boot.failures,
        ).to_dict()
        if config.dump_replicates:
            write_column(_dump_path(config.dump_replicates, m, len(boot_methods) > 1), m, boot.values)
    bounds = None
    if "bounds" in methods:
        lo, hi = config.bounds
        bounds = bound_mean(positive_region_mean(cohort), prop_nonpositive(cohort), lo, hi).to_dict()
        if "synthesis" in estimates:
            point = estimates["synthesis"]["point"]
            if not bounds["lower"] <= point <= bounds["upper"]:
                warns.append("synthesis point estimate lies outside the plug-in bounds")
    diagnostic = None
    if "diagnostic" in methods:
        d = diagnostic_compare(cohort, table, plan, config.draws_per_participant)
        diagnostic = d.to_dict()
        warns.extend(f"diagnostic: {w}" for w in d.warnings)
    return AnalysisReport(
        config=config.echo(),
        cohort=cohort_summary(cohort),
        estimates=estimates,
        bounds=bounds,
        diagnostic=diagnostic,
        warnings=warns,
    )


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file so no partial file is left behind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x, digits=None):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}f}" if digits is not None else repr(float(x))


def write_column(path, name, values):
    atomic_write(path, csv_text([name], [[_num(v)] for v in values]))


def table1_text(rows):
    """Age table as CSV; percentages to one decimal."""
    rows = [
        [r["age"], r["n"], _num(r["weighted_pct"], 1), r["n_missing"], _num(r["pct_missing"], 1)]
        for r in rows
    ]
    return csv_text(["age", "n", "weighted_pct", "n_missing", "pct_missing"], rows)


def emit_table1(cohort, path):
    atomic_write(path, table1_text(missingness_table(cohort)))


def emit_diagnostic(rows, path):
    """``rows``: diagnostic rows as dicts, as stored in the report."""
    rows = [
        [r["age"], _num(r["stat_mean"]), _num(r["math_mean"]), _num(r["diff"]), _num(r["ci_lo"]), _num(r["ci_hi"])]
        for r in rows
    ]
    atomic_write(path, csv_text(["age", "stat_mean", "math_mean", "diff", "ci_lo", "ci_hi"], rows))


def emit_figure_data(cohort, table, models=None, path_prefix="", n_draws=20_000, seed=0, ages=None):
    """Write the plot data: observed points, model curves and simulated draws.

    Simulated draws for an age pick participants of that age with probability
    proportional to sampling weight and draw one reference value for each.
    No jitter is applied. Returns the three paths written.
    """
    if models is None:
        models = {"linear": fit_linear_wls(cohort), "saturated": fit_saturated(cohort)}
    prefix = str(path_prefix)
    obs = cohort.observed
    paths = [f"{prefix}observed.csv", f"{prefix}curves.csv", f"{prefix}simulated.csv"]
    atomic_write(paths[0], csv_text(
        ["age", "sbp", "weight"],
        [[int(a), _num(y), _num(w)] for a, y, w in zip(cohort.age[obs], cohort.outcome[obs], cohort.weight[obs])],
    ))
    curve_rows = []
    sat = models.get("saturated")
    lin = models.get("linear")
    for a in np.unique(cohort.age):
        a = int(a)
        sat_val = sat.coefficients.get(a) if sat is not None else None
        lin_val = float(lin.predict(a)) if lin is not None else None
        curve_rows.append([a, _num(lin_val), _num(sat_val)])
    atomic_write(paths[1], csv_text(["age", "linear_pred", "saturated_mean"], curve_rows))
    sim_rows = []
    if table is not None:
        cohort = ensure_height_percentiles(cohort)
        sim_ages = np.unique(cohort.age) if ages is None else np.asarray(sorted(ages))
        for a in sim_ages:
            rows = np.flatnonzero(cohort.age == a)
            if len(rows) == 0:
                raise DomainError(f"no participants aged {a} to simulate from")
            rng = substream(seed, int(a), FIGURES)
            w = cohort.weight[rows]
            pick = rows[rng.choice(len(rows), size=n_draws, p=w / w.sum())]
            values = table.draw(cohort.age[pick], cohort.gender[pick], cohort.height_percentile[pick], rng)
            sim_rows.extend([int(a), _num(v)] for v in values)
    atomic_write(paths[2], csv_text(["age", "value"], sim_rows))
    return paths


def simulate_rows(table, ages, genders, percentile, n, seed):
    """Rows (age, gender, bracket, value) of reference draws per stratum."""
    out = []
    for a in ages:
        for g in genders:
            bracket = nearest_bracket(percentile, table.brackets(a, g))
            rng = substream(seed, int(a) * 2 + GENDERS.index(g), FIGURES)
            for v in simulate_stratum(table, a, g, percentile, n, rng):
                out.append([int(a), g, _num(bracket), _num(v)])
    return out

