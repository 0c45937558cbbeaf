"""Seeded nonparametric bootstrap with percentile summaries.

Replicate ``r`` always draws from the substream keyed by ``(seed, stream, r)``,
so results do not depend on how replicates are split across workers.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .errors import BootstrapError, DomainError, EstimationError

log = logging.getLogger(__name__)

#: substream families, so procedures sharing a seed stay independent
ESTIMATION, DIAGNOSTIC, FULL_SAMPLE, FIGURES = 0, 1, 2, 3

WARN_FAILURE_RATE = 0.01
FATAL_FAILURE_RATE = 0.10


@dataclass(frozen=True)
class ResamplePlan:
    replicates: int = 20_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class ReplicateSummary:
    median: float
    p2_5: float
    p97_5: float
    sd: float
    n: int


@dataclass
class BootstrapResult:
    values: np.ndarray
    failures: int
    requested: int
    warning: str = ""


def substream(seed, index, stream=ESTIMATION):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def resample_with_replacement(cohort, rng):
    """Same-size resample, rows drawn uniformly (weights carried, not used)."""
    n = len(cohort)
    return cohort.take(rng.integers(0, n, size=n))


def _run_chunk(cohort, estimator, seed, stream, indices):
    out = []
    failed = []
    for r in indices:
        rng = substream(seed, int(r), stream)
        try:
            out.append(estimator(resample_with_replacement(cohort, rng), rng))
        except EstimationError as exc:
            failed.append((int(r), str(exc)))
            out.append(None)
    return out, failed


def bootstrap(cohort, estimator, plan, stream=ESTIMATION):
    """Evaluate ``estimator(resampled_cohort, rng)`` on ``plan.replicates`` resamples.

    The estimator may return a scalar or a 1-d array. Replicates that raise an
    :class:`EstimationError` are excluded and counted; more than 10% failures is
    fatal, more than 1% is warned about.
    """
    estimator(cohort, np.random.default_rng(plan.seed))  # precondition: works on full data
    idx = np.arange(plan.replicates)
    if plan.workers == 1:
        parts = [_run_chunk(cohort, estimator, plan.seed, stream, idx)]
    else:
        chunks = np.array_split(idx, min(plan.replicates, plan.workers * 4))
        parts = Parallel(n_jobs=plan.workers)(
            delayed(_run_chunk)(cohort, estimator, plan.seed, stream, c) for c in chunks
        )
    values, failed = [], []
    for vals, fails in parts:
        values.extend(v for v in vals if v is not None)
        failed.extend(fails)
    rate = len(failed) / plan.replicates
    if rate > FATAL_FAILURE_RATE:
        raise BootstrapError(
            f"{len(failed)} of {plan.replicates} replicates failed; first: {failed[0][1]}"
        )
    msg = ""
    if rate > WARN_FAILURE_RATE:
        msg = f"{len(failed)} of {plan.replicates} bootstrap replicates failed and were excluded"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if failed:
        log.info("%d failed replicates, e.g. replicate %d: %s", len(failed), *failed[0])
    return BootstrapResult(np.asarray(values, dtype=float), len(failed), plan.replicates, msg)


def percentile(values, q):
    """Linear interpolation between order statistics at rank 1 + q(n - 1)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("percentile of empty input")
    if not 0 <= q <= 1:
        raise DomainError(f"quantile {q} outside [0, 1]")
    return float(np.quantile(values, q, method="linear"))


def summarize(values):
    # sorted first so every statistic, sd included, is order-invariant bit for bit
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise DomainError("no replicate values to summarize")
    med, lo, hi = np.quantile(values, [0.5, 0.025, 0.975], method="linear")
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return ReplicateSummary(median=float(med), p2_5=float(lo), p97_5=float(hi), sd=sd, n=int(values.size))
