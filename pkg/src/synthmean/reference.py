"""External reference distributions of the outcome and draws from them.

Each stratum (age, gender, height-percentile bracket) carries a published
median and 90th percentile. Draws are normal with mean equal to the median
and the SD implied by the 90th percentile. Draws are not truncated.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .cohort import GENDERS
from .errors import CoverageError, DomainError, ReferenceTableError

#: standard-normal 90th percentile, 1.2815516 to 7 digits
Z90 = NormalDist().inv_cdf(0.90)

COLUMNS = ("age", "gender", "height_percentile", "p50", "p90")


@dataclass(frozen=True)
class ReferenceRow:
    age: int
    gender: str
    height_percentile: float
    p50: float
    p90: float


@dataclass(frozen=True)
class NormalParams:
    mean: float
    sd: float


def params_from_percentiles(p50, p90):
    if not p90 > p50:
        raise DomainError(f"90th percentile ({p90}) must exceed the median ({p50})")
    return NormalParams(mean=float(p50), sd=(p90 - p50) / Z90)


def nearest_bracket(percentile, brackets):
    """Bracket closest to ``percentile``; exact ties go to the lower bracket."""
    if len(brackets) == 0:
        raise DomainError("no brackets to match against")
    best = None
    for b in sorted(brackets):
        d = abs(percentile - b)
        if best is None or d < best[0]:
            best = (d, b)
    return best[1]


class ReferenceTable:
    """Validated, immutable reference table indexed by (age, gender code)."""

    def __init__(self, rows):
        self.rows = tuple(rows)
        if not self.rows:
            raise ReferenceTableError("reference table is empty")
        grouped = {}
        for r in self.rows:
            if r.gender not in GENDERS:
                raise ReferenceTableError(f"unknown gender {r.gender!r}")
            if not 0 < r.height_percentile < 100:
                raise ReferenceTableError(f"height percentile bracket {r.height_percentile} outside (0, 100)")
            key = (r.age, GENDERS.index(r.gender))
            grouped.setdefault(key, []).append(r)
        self._strata = {}
        for key, rs in grouped.items():
            rs = sorted(rs, key=lambda r: r.height_percentile)
            brackets = np.array([r.height_percentile for r in rs])
            if np.any(np.diff(brackets) == 0):
                raise ReferenceTableError(f"duplicate bracket in stratum age={key[0]} gender={GENDERS[key[1]]}")
            params = [params_from_percentiles(r.p50, r.p90) for r in rs]
            means = np.array([p.mean for p in params])
            sds = np.array([p.sd for p in params])
            self._strata[key] = (brackets, means, sds)
        # dense (stratum x bracket) grid for vectorised lookup; inf pads never win argmin
        keys = sorted(self._strata)
        width = max(len(v[0]) for v in self._strata.values())
        self._slot = np.full(2 * (max(a for a, _ in keys) + 1), -1, dtype=np.int64)
        self._grid = np.full((len(keys), width), np.inf)
        self._gmean = np.zeros((len(keys), width))
        self._gsd = np.zeros((len(keys), width))
        for s, (a, g) in enumerate(keys):
            b, m, sd = self._strata[(a, g)]
            if a >= 0:
                self._slot[2 * a + g] = s
            self._grid[s, :len(b)] = b
            self._gmean[s, :len(b)] = m
            self._gsd[s, :len(b)] = sd

    @property
    def coverage(self):
        return {(a, GENDERS[g]) for a, g in self._strata}

    def covers(self, age, gender):
        g = gender if isinstance(gender, (int, np.integer)) else GENDERS.index(gender)
        return (int(age), int(g)) in self._strata

    def require(self, ages, genders):
        """Raise :class:`CoverageError` unless every (age, gender code) pair is covered."""
        pairs = set(zip(np.asarray(ages).tolist(), np.asarray(genders).tolist()))
        missing = [(a, GENDERS[g]) for a, g in pairs if (a, g) not in self._strata]
        if missing:
            raise CoverageError(missing)

    def brackets(self, age, gender):
        g = gender if isinstance(gender, (int, np.integer)) else GENDERS.index(gender)
        try:
            return self._strata[(int(age), int(g))][0].tolist()
        except KeyError:
            raise CoverageError([(int(age), GENDERS[g])]) from None

    def params(self, age, gender, height_percentile):
        brackets = self.brackets(age, gender)
        g = gender if isinstance(gender, (int, np.integer)) else GENDERS.index(gender)
        _, means, sds = self._strata[(int(age), int(g))]
        i = brackets.index(nearest_bracket(height_percentile, brackets))
        return NormalParams(float(means[i]), float(sds[i]))

    def lookup(self, age, gender, height_percentile):
        """Vectorised :meth:`params`: arrays of (mean, sd) per element."""
        age = np.asarray(age, dtype=np.int64)
        gender = np.asarray(gender, dtype=np.int64)
        pct = np.asarray(height_percentile, dtype=float)
        if len(age) == 0:
            return np.empty(0), np.empty(0)
        key = 2 * age + gender
        inside = (key >= 0) & (key < len(self._slot))
        slot = np.where(inside, self._slot[np.where(inside, key, 0)], -1)
        if (slot < 0).any():
            self.require(age, gender)
        # argmin keeps the first (lower) bracket on exact ties
        i = np.argmin(np.abs(pct[:, None] - self._grid[slot]), axis=1)
        return self._gmean[slot, i], self._gsd[slot, i]

    def draw(self, age, gender, height_percentile, rng):
        """One normal draw per element, consumed from ``rng`` in element order."""
        mean, sd = self.lookup(age, gender, height_percentile)
        return mean + sd * rng.standard_normal(len(mean))


def draw_outcome(table, age, gender, height_percentile, rng):
    p = table.params(age, gender, height_percentile)
    return p.mean + p.sd * rng.standard_normal()


def simulate_stratum(table, age, gender, height_percentile, n, rng):
    p = table.params(age, gender, height_percentile)
    return p.mean + p.sd * rng.standard_normal(int(n))


def load_reference_table(stream, delimiter=","):
    reader = csv.DictReader(stream, delimiter=delimiter)
    absent = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
    if absent:
        raise ReferenceTableError(f"reference table lacks column(s): {', '.join(absent)}")
    rows, problems, seen = [], [], {}
    for rec in reader:
        line = reader.line_num
        try:
            age = float(rec["age"])
            if age != int(age):
                raise ValueError(f"non-integer age {rec['age']!r}")
            row = ReferenceRow(
                age=int(age),
                gender=rec["gender"].strip().lower(),
                height_percentile=float(rec["height_percentile"]),
                p50=float(rec["p50"]),
                p90=float(rec["p90"]),
            )
        except (ValueError, TypeError, AttributeError) as exc:
            problems.append(f"line {line}: {exc}")
            continue
        if not all(math.isfinite(v) for v in (row.height_percentile, row.p50, row.p90)):
            problems.append(f"line {line}: non-finite value")
            continue
        if not row.p90 > row.p50:
            problems.append(f"line {line}: p90 ({row.p90}) must exceed p50 ({row.p50})")
            continue
        key = (row.age, row.gender, row.height_percentile)
        if key in seen:
            raise ReferenceTableError(f"line {line}: duplicate stratum {key} (first on line {seen[key]})")
        seen[key] = line
        rows.append(row)
    if problems:
        raise ReferenceTableError("invalid reference rows: " + "; ".join(problems))
    return ReferenceTable(rows)


def read_reference_table(path, delimiter=","):
    with open(path, newline="", encoding="utf-8") as fh:
        return load_reference_table(fh, delimiter=delimiter)


def _fmt(x):
    return repr(float(x))


def dump_reference_table(table, stream, delimiter=","):
    """Write ``table`` in canonical form (rows in load order, floats via repr)."""
    w = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in table.rows:
        w.writerow([r.age, r.gender, _fmt(r.height_percentile), _fmt(r.p50), _fmt(r.p90)])
