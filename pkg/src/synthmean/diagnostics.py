"""Positive-region check of the reference model against the statistical model.

For every age at or above the cutoff, compare the saturated-model mean with
the mean of reference-model draws for the same participants. Only
positive-region strata of the reference table are consulted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PositivityError
from .estimators import fit_saturated
from .resampling import DIAGNOSTIC, FULL_SAMPLE, bootstrap, substream, summarize


@dataclass(frozen=True)
class DiagnosticRow:
    age: int
    stat_mean: float
    math_mean: float
    diff: float
    ci_lo: float
    ci_hi: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class DiagnosticResult:
    rows: list
    replicates: int
    failures: int = 0
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rows": [r.to_dict() for r in self.rows],
            "replicates": self.replicates,
            "failures": self.failures,
            "warnings": list(self.warnings),
        }


def _math_means(cohort, table, ages, rng, draws):
    """Weighted mean of reference draws per age in ``ages`` (positive region only)."""
    rows = np.flatnonzero(np.isin(cohort.age, ages) & cohort.positive)
    mean, sd = table.lookup(cohort.age[rows], cohort.gender[rows], cohort.height_percentile[rows])
    z = rng.standard_normal((len(rows), draws))
    values = (mean[:, None] + sd[:, None] * z).mean(axis=1)
    slot = np.searchsorted(ages, cohort.age[rows])
    w = cohort.weight[rows]
    wsum = np.bincount(slot, weights=w, minlength=len(ages))
    if not np.all(wsum > 0):
        raise PositivityError(np.asarray(ages)[~(wsum > 0)])
    return np.bincount(slot, weights=w * values, minlength=len(ages)) / wsum


def _stat_means(cohort, ages):
    coefs = fit_saturated(cohort, positive_only=True).coefficients
    absent = [a for a in ages if a not in coefs]
    if absent:
        raise PositivityError(absent)
    return np.array([coefs[a] for a in ages])


def math_model_age_mean(table, cohort, age, rng, draws_per_participant=100):
    if age < cohort.cutoff:
        raise DomainError(f"age {age} is outside the positive region")
    if not np.any(cohort.age == age):
        raise DomainError(f"no participants aged {age}")
    return float(_math_means(cohort, table, np.array([age]), rng, draws_per_participant)[0])


class _ReplicateDiff:
    def __init__(self, table, ages):
        self.table = table
        self.ages = ages

    def __call__(self, cohort, rng):
        stat = _stat_means(cohort, self.ages)
        return stat - _math_means(cohort, self.table, self.ages, rng, 1)


def rows_from(ages, stat_mean, math_mean, replicate_diffs):
    """Assemble rows: point diff from the full-data means, CI from replicate diffs."""
    out = []
    for j, a in enumerate(ages):
        s = summarize(replicate_diffs[:, j])
        out.append(DiagnosticRow(
            age=int(a),
            stat_mean=float(stat_mean[j]),
            math_mean=float(math_mean[j]),
            diff=float(stat_mean[j] - math_mean[j]),
            ci_lo=s.p2_5,
            ci_hi=s.p97_5,
        ))
    return out


def diagnostic_compare(cohort, table, plan, draws_per_participant=100):
    """Per-age statistical-minus-mathematical mean difference with bootstrap CIs.

    The point estimate averages ``draws_per_participant`` reference draws per
    participant; each replicate uses a single draw per participant.
    """
    ages = np.unique(cohort.age[cohort.positive])
    if len(ages) == 0:
        raise DomainError("positive region is empty")
    stat = _stat_means(cohort, ages)
    math_ = _math_means(cohort, table, ages, substream(plan.seed, 1, FULL_SAMPLE), draws_per_participant)
    boot = bootstrap(cohort, _ReplicateDiff(table, ages), plan, stream=DIAGNOSTIC)
    rows = rows_from(ages, stat, math_, boot.values.reshape(len(boot.values), len(ages)))
    warns = [boot.warning] if boot.warning else []
    off = [r.age for r in rows if not r.ci_lo <= 0 <= r.ci_hi]
    if off:
        warns.append(
            "statistical and reference-model means differ (CI excludes 0) at age(s) "
            + ", ".join(map(str, off))
        )
    return DiagnosticResult(rows=rows, replicates=plan.replicates, failures=boot.failures, warnings=warns)
