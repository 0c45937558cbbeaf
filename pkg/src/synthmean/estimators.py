"""Point estimators of the weighted population mean outcome.

All stratum probabilities come from sampling weights. Every estimator here is
a pure function of its inputs (plus an explicit generator for the synthesis
estimator), so it can be re-evaluated on bootstrap resamples unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cohort import Participant
from .errors import DomainError, ExtrapolationError, PositivityError

METHODS = ("complete_case", "gcomp_saturated", "gcomp_linear", "synthesis")


@dataclass(frozen=True)
class FittedOutcomeModel:
    kind: str
    coefficients: dict = field(default_factory=dict)
    intercept: float = float("nan")
    slope: float = float("nan")

    def predict(self, ages):
        ages = np.asarray(ages)
        if self.kind == "linear":
            return self.intercept + self.slope * ages
        # saturated: lookup only, never extrapolate
        if ages.ndim == 0:
            if int(ages) not in self.coefficients:
                raise ExtrapolationError([int(ages)])
            return self.coefficients[int(ages)]
        dense = np.full(max(max(self.coefficients, default=0), int(ages.max(initial=0))) + 1, np.nan)
        for a, b in self.coefficients.items():
            dense[a] = b
        if ages.size and ages.min() < 0:
            raise ExtrapolationError(ages[ages < 0])
        out = dense[ages]
        gap = np.isnan(out)
        if gap.any():
            raise ExtrapolationError(np.unique(ages[gap]))
        return out


@dataclass(frozen=True)
class EstimateResult:
    method: str
    point: float
    ci: Optional[tuple] = None
    replicates: int = 0
    seed: Optional[int] = None
    sd: Optional[float] = None
    full_sample: Optional[float] = None
    failures: int = 0

    def __post_init__(self):
        if self.ci is not None and not self.ci[0] <= self.point <= self.ci[1]:
            raise ValueError(f"{self.method}: point {self.point} outside CI {self.ci}")

    def to_dict(self):
        return {
            "method": self.method,
            "point": self.point,
            "ci": None if self.ci is None else list(self.ci),
            "replicates": self.replicates,
            "seed": self.seed,
            "sd": self.sd,
            "full_sample": self.full_sample,
            "failures": self.failures,
        }


@dataclass(frozen=True)
class BoundsResult:
    lower: float
    upper: float
    plug_lo: float
    plug_hi: float
    prop_nonpositive: float
    positive_mean: float

    def to_dict(self):
        return dict(self.__dict__)


def weighted_mean(values, weights):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise DomainError("values and weights differ in length")
    total = weights.sum()
    if not total > 0:
        raise DomainError("total weight must be positive")
    return float(np.dot(weights, values) / total)


def complete_case_mean(cohort):
    r = cohort.observed
    if not r.any():
        raise DomainError("no observed outcomes")
    return weighted_mean(cohort.outcome[r], cohort.weight[r])


def fit_saturated(cohort, positive_only=True):
    """One coefficient per age: the weighted mean of observed outcomes at that age.

    With ``positive_only`` the fit covers ages at or above the cutoff;
    otherwise every age present in the cohort. An age in the fitted region
    without any observed outcome raises :class:`PositivityError`.
    """
    region = cohort.positive if positive_only else np.ones(len(cohort), dtype=bool)
    lo = cohort.age_range[0]
    size = cohort.age_range[1] - lo + 1
    r = cohort.observed & region
    a = cohort.age - lo
    present = np.bincount(a[region], minlength=size) > 0
    wsum = np.bincount(a[r], weights=cohort.weight[r], minlength=size)
    wy = np.bincount(a[r], weights=cohort.weight[r] * cohort.outcome[r], minlength=size)
    unobserved = present & ~(wsum > 0)
    if unobserved.any():
        raise PositivityError(np.flatnonzero(unobserved) + lo)
    ages = np.flatnonzero(present)
    coefs = {int(k + lo): float(wy[k] / wsum[k]) for k in ages}
    return FittedOutcomeModel(kind="saturated", coefficients=coefs)


def fit_linear_wls(cohort, positive_only=True):
    """Weighted least squares of outcome on age via the 2x2 normal equations."""
    r = cohort.observed
    if positive_only:
        r = r & cohort.positive
    x = cohort.age[r].astype(float)
    y = cohort.outcome[r]
    w = cohort.weight[r]
    if len(np.unique(x)) < 2:
        raise DomainError("linear fit needs at least two distinct observed ages")
    # centre on weighted means; algebraically the same normal equations, better conditioned
    sw = w.sum()
    xbar = np.dot(w, x) / sw
    ybar = np.dot(w, y) / sw
    dx = x - xbar
    sxx = np.dot(w, dx * dx)
    sxy = np.dot(w, dx * (y - ybar))
    slope = sxy / sxx
    return FittedOutcomeModel(kind="linear", intercept=float(ybar - slope * xbar), slope=float(slope))


def predict(model, participant):
    """Prediction for a :class:`Participant`, an age, or an array of ages."""
    age = participant.age if isinstance(participant, Participant) else participant
    out = model.predict(age)
    return float(out) if np.ndim(out) == 0 else out


def g_computation_mean(cohort, model):
    """Weighted mean of model predictions over every participant, observed or not."""
    return weighted_mean(model.predict(cohort.age), cohort.weight)


def synthesis_fill(cohort, table, rng):
    """Filled outcome vector for the synthesis estimator.

    Positive-region participants get the saturated-model prediction; the rest
    get one draw each from the reference table, in row order.
    """
    model = fit_saturated(cohort, positive_only=True)
    pos = cohort.positive
    filled = np.empty(len(cohort))
    filled[pos] = model.predict(cohort.age[pos])
    neg = ~pos
    filled[neg] = table.draw(cohort.age[neg], cohort.gender[neg], cohort.height_percentile[neg], rng)
    return filled


def synthesis_point(cohort, table, rng):
    return weighted_mean(synthesis_fill(cohort, table, rng), cohort.weight)


def synthesis_decomposition(cohort, table, rng):
    """The same estimate as two region means and the nonpositive share.

    Returns ``(positive_mean, nonpositive_mean, prop_nonpositive)``; with the
    same generator state, ``positive_mean * (1 - p) + nonpositive_mean * p``
    equals :func:`synthesis_point`.
    """
    filled = synthesis_fill(cohort, table, rng)
    pos = cohort.positive
    p = prop_nonpositive(cohort)
    mpos = weighted_mean(filled[pos], cohort.weight[pos]) if pos.any() else 0.0
    mneg = weighted_mean(filled[~pos], cohort.weight[~pos]) if (~pos).any() else 0.0
    return mpos, mneg, p


def prop_nonpositive(cohort):
    w = cohort.weight
    return float(w[~cohort.positive].sum() / w.sum())


def positive_region_mean(cohort):
    """g-computation mean restricted to the positive region (saturated model)."""
    pos = cohort.positive
    if not pos.any():
        raise DomainError("positive region is empty")
    model = fit_saturated(cohort, positive_only=True)
    return weighted_mean(model.predict(cohort.age[pos]), cohort.weight[pos])


def bound_mean(positive_mean, prop_nonpositive, plug_lo, plug_hi):
    """Range of the overall mean when the nonpositive-region mean lies in [plug_lo, plug_hi]."""
    if not 0 <= prop_nonpositive <= 1:
        raise DomainError(f"proportion {prop_nonpositive} outside [0, 1]")
    if plug_lo > plug_hi:
        raise DomainError(f"plug-in values inverted: {plug_lo} > {plug_hi}")
    keep = positive_mean * (1 - prop_nonpositive)
    return BoundsResult(
        lower=keep + plug_lo * prop_nonpositive,
        upper=keep + plug_hi * prop_nonpositive,
        plug_lo=plug_lo,
        plug_hi=plug_hi,
        prop_nonpositive=prop_nonpositive,
        positive_mean=positive_mean,
    )


# Estimator callables with the (cohort, rng) signature used by the bootstrap.

def _complete_case(cohort, rng):
    return complete_case_mean(cohort)


def _gcomp_linear(cohort, rng):
    return g_computation_mean(cohort, fit_linear_wls(cohort))


def _gcomp_saturated(cohort, rng):
    return g_computation_mean(cohort, fit_saturated(cohort, positive_only=False))


class _Synthesis:
    def __init__(self, table):
        self.table = table

    def __call__(self, cohort, rng):
        return synthesis_point(cohort, self.table, rng)


def make_estimator(method, table=None):
    if method == "complete_case":
        return _complete_case
    if method == "gcomp_linear":
        return _gcomp_linear
    if method == "gcomp_saturated":
        return _gcomp_saturated
    if method == "synthesis":
        if table is None:
            raise ValueError("synthesis requires a reference table")
        return _Synthesis(table)
    raise ValueError(f"unknown method {method!r}")
