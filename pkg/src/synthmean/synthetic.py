"""Synthetic cohorts with a known population mean.

Outcomes are drawn from a reference table, so a cohort built here satisfies
the reference model exactly; missingness depends on age only and is
deterministic below the cutoff.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .cohort import GENDERS, Cohort
from .reference import ReferenceRow, ReferenceTable

BRACKETS = (5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0)


def synthetic_reference_table(ages=range(1, 18), brackets=BRACKETS):
    """Smooth, integer-valued illustrative table (not published values)."""
    rows = []
    for a in ages:
        for g in GENDERS:
            for b in brackets:
                if g == "male":
                    base = 85 + 1.0 * a + 0.045 * a * a
                else:
                    base = 85 + 1.5 * a - 0.01 * a * a
                p50 = round(base + 0.04 * (b - 50))
                p90 = p50 + round(12 + 0.15 * a)
                rows.append(ReferenceRow(a, g, b, float(p50), float(p90)))
    return ReferenceTable(rows)


def default_observe_prob(age, cutoff=8):
    """Probability the outcome is observed: zero below the cutoff, rising with age above it."""
    age = np.asarray(age)
    return np.where(age >= cutoff, np.clip(0.78 + 0.02 * (age - cutoff), 0, 1), 0.0)


def _bracket_probs(brackets):
    """P(nearest bracket) under a uniform percentile on [0, 100], ties to lower."""
    b = np.sort(np.asarray(brackets, dtype=float))
    edges = np.concatenate(([0.0], (b[:-1] + b[1:]) / 2, [100.0]))
    return np.clip(np.diff(np.clip(edges, 0, 100)), 0, None) / 100.0


def stratum_mean(table, age, gender):
    """Outcome mean within (age, gender) when height percentile is uniform."""
    brackets = table.brackets(age, gender)
    probs = _bracket_probs(brackets)
    means = [table.params(age, gender, b).mean for b in brackets]
    return float(np.dot(probs, means))


def true_mean(table, age_probs, male_prob=0.5):
    """Population mean for ages distributed per ``age_probs`` (dict age -> prob)."""
    total = 0.0
    for a, p in age_probs.items():
        total += p * (male_prob * stratum_mean(table, a, "male")
                      + (1 - male_prob) * stratum_mean(table, a, "female"))
    return total / sum(age_probs.values())


def uniform_age_probs(age_range=(2, 17)):
    ages = range(age_range[0], age_range[1] + 1)
    return {a: 1.0 / len(ages) for a in ages}


def simulate_cohort(table, n, rng, cutoff=8, age_range=(2, 17), pop_age_probs=None,
                    sample_age_probs=None, observe_prob=None, male_prob=0.5,
                    weight_noise=0.3, ages=None, observed=None):
    """Draw a cohort whose weighted mean targets :func:`true_mean` of ``pop_age_probs``.

    Ages are sampled from ``sample_age_probs`` (default: population) and
    weighted by population/sample ratio times lognormal noise. Height is a
    monotone function of a latent uniform percentile, which also selects the
    reference bracket used to draw the outcome. ``ages`` and ``observed`` may
    be given explicitly to fix the design.
    """
    pop = pop_age_probs or uniform_age_probs(age_range)
    samp = sample_age_probs or pop
    keys = np.array(sorted(pop))
    pop_p = np.array([pop[a] for a in keys]) / sum(pop.values())
    samp_p = np.array([samp.get(a, 0.0) for a in keys])
    samp_p = samp_p / samp_p.sum()
    if ages is None:
        ages = rng.choice(keys, size=n, p=samp_p)
    ages = np.asarray(ages)
    n = len(ages)
    ratio = dict(zip(keys.tolist(), (pop_p / np.where(samp_p > 0, samp_p, np.nan)).tolist()))
    weight = np.array([ratio[a] for a in ages.tolist()]) * rng.lognormal(0.0, weight_noise, size=n)
    gender = (rng.random(n) >= male_prob).astype(np.int8)
    u = rng.uniform(0.0, 100.0, size=n)
    height = 75.0 + 6.0 * ages + 1.0 * (gender == 0) + 0.25 * u
    y = table.draw(ages, gender, u, rng)
    if observed is None:
        prob = default_observe_prob(ages, cutoff) if observe_prob is None else observe_prob(ages)
        observed = rng.random(n) < prob
    observed = np.asarray(observed, dtype=bool)
    outcome = np.where(observed, y, np.nan)
    return Cohort(
        ids=[f"S{i:05d}" for i in range(n)],
        age=ages, gender=gender, height=height,
        height_percentile=np.full(n, np.nan), outcome=outcome, weight=weight,
        cutoff=cutoff, age_range=age_range,
    )


def write_cohort_csv(cohort, path, rng, reading_sd=2.0, p_two_readings=0.1):
    """Write ``cohort`` in the default CSV schema, inventing readings.

    Observed participants get two or three readings scattered around their
    outcome; unobserved ones get zero readings below the cutoff and zero or one
    reading above it.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "age", "gender", "height_cm", "reading1", "reading2", "reading3", "weight"])
        for i in range(len(cohort)):
            y = cohort.outcome[i]
            if not np.isnan(y):
                k = 2 if rng.random() < p_two_readings else 3
                readings = [f"{v:.0f}" for v in y + reading_sd * rng.standard_normal(k)]
            elif cohort.age[i] >= cohort.cutoff and rng.random() < 0.5:
                readings = [f"{100 + 10 * rng.standard_normal():.0f}"]
            else:
                readings = []
            readings += [""] * (3 - len(readings))
            w.writerow([
                cohort.ids[i], int(cohort.age[i]), GENDERS[cohort.gender[i]],
                f"{cohort.height[i]:.1f}", *readings, f"{cohort.weight[i]:.4f}",
            ])


@dataclass
class CoverageStudy:
    truth: float
    points: dict
    lower: dict
    upper: dict

    def coverage(self, method):
        return float(np.mean((self.lower[method] <= self.truth) & (self.truth <= self.upper[method])))

    def bias(self, method):
        """Mean error over rounds and its Monte Carlo standard error."""
        err = self.points[method] - self.truth
        return float(err.mean()), float(err.std(ddof=1) / np.sqrt(len(err)))


def coverage_study(table, rounds=200, n=2000, replicates=1000, seed=0,
                   methods=("synthesis", "complete_case"), **simulate_kw):
    """Repeatedly simulate a cohort from ``table``, bootstrap each method, record CIs.

    The reference table used for synthesis is the generator itself, so the
    synthesis CI should cover the true mean at close to the nominal rate.
    Round ``k`` simulates from substream ``(seed, k)`` and bootstraps with seed
    ``seed + k``.
    """
    from .cohort import empirical_height_percentile
    from .estimators import make_estimator
    from .resampling import ResamplePlan, bootstrap, substream, summarize

    age_range = simulate_kw.get("age_range", (2, 17))
    truth = true_mean(table, simulate_kw.get("pop_age_probs") or uniform_age_probs(age_range),
                      simulate_kw.get("male_prob", 0.5))
    estimators = {m: make_estimator(m, table) for m in methods}
    points = {m: np.empty(rounds) for m in methods}
    lower = {m: np.empty(rounds) for m in methods}
    upper = {m: np.empty(rounds) for m in methods}
    for k in range(rounds):
        cohort = simulate_cohort(table, n, substream(seed, k), **simulate_kw)
        cohort = empirical_height_percentile(cohort)
        for m, est in estimators.items():
            s = summarize(bootstrap(cohort, est, ResamplePlan(replicates, seed + k)).values)
            points[m][k], lower[m][k], upper[m][k] = s.median, s.p2_5, s.p97_5
    return CoverageStudy(truth, points, lower, upper)
