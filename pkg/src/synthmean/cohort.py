"""Reading the analysis cohort from delimited text.

A cohort is stored column-wise (numpy arrays) so that bootstrap resampling is
a single fancy-indexing pass; :class:`Participant` gives the row view.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import CohortFormatError, DomainError, MissingHeightError, SchemaError

GENDERS = ("male", "female")

DEFAULT_GENDER_CODES = {
    "male": "male",
    "female": "female",
    "m": "male",
    "f": "female",
    "1": "male",
    "2": "female",
}


@dataclass(frozen=True)
class ColumnMapping:
    """Binds cohort fields to CSV column names."""

    id: str = "id"
    age: str = "age"
    gender: str = "gender"
    height: str = "height_cm"
    readings: tuple = ("reading1", "reading2", "reading3")
    weight: str = "weight"
    # precomputed height percentiles; computed empirically when None
    height_percentile: Optional[str] = None
    gender_codes: dict = field(default_factory=lambda: dict(DEFAULT_GENDER_CODES))

    def __post_init__(self):
        if len(self.readings) > 3:
            raise SchemaError("at most three reading columns may be mapped")
        object.__setattr__(self, "readings", tuple(self.readings))
        for code in self.gender_codes.values():
            if code not in GENDERS:
                raise SchemaError(f"gender code maps to unknown gender {code!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "gender_codes" in d:
            d["gender_codes"] = {str(k).strip().lower(): v for k, v in d["gender_codes"].items()}
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["readings"] = list(self.readings)
        return d


@dataclass(frozen=True)
class Participant:
    id: str
    age: int
    gender: str
    height: float
    height_percentile: float
    outcome: Optional[float]
    observed: bool
    region: bool
    sampling_weight: float

    def __post_init__(self):
        if self.observed != (self.outcome is not None):
            raise ValueError(f"participant {self.id}: observed flag disagrees with outcome")
        if not self.sampling_weight > 0:
            raise ValueError(f"participant {self.id}: sampling weight must be positive")


@dataclass(frozen=True)
class IngestReport:
    rows_read: int = 0
    rows_retained: int = 0
    dropped_out_of_range: int = 0
    dropped_zero_weight: int = 0
    dropped_missing_height: int = 0

    def to_dict(self):
        return asdict(self)


_COLUMNS = ("ids", "age", "gender", "height", "height_percentile", "outcome", "weight")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Cohort:
    """Immutable column store of participants.

    ``gender`` holds integer codes indexing :data:`GENDERS`; missing outcomes,
    heights and (not yet computed) height percentiles are NaN.
    """

    ids: np.ndarray
    age: np.ndarray
    gender: np.ndarray
    height: np.ndarray
    height_percentile: np.ndarray
    outcome: np.ndarray
    weight: np.ndarray
    cutoff: int = 8
    age_range: tuple = (2, 17)
    ingest: Optional[IngestReport] = None

    def __post_init__(self):
        n = len(self.ids)
        set_ = lambda name, value: object.__setattr__(self, name, value)
        set_("ids", _frozen(self.ids, object))
        set_("age", _frozen(self.age, np.int64))
        set_("gender", _frozen(self.gender, np.int8))
        for name in ("height", "height_percentile", "outcome", "weight"):
            set_(name, _frozen(getattr(self, name), np.float64))
        set_("age_range", (int(self.age_range[0]), int(self.age_range[1])))
        if n == 0:
            raise DomainError("cohort is empty")
        for name in ("age", "gender", "height", "height_percentile", "outcome", "weight"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        lo, hi = self.age_range
        if self.age.min() < lo or self.age.max() > hi:
            raise DomainError(f"ages must lie within [{lo}, {hi}]")
        if not np.all(self.weight > 0):
            raise DomainError("sampling weights must be positive")
        if not np.isin(self.gender, (0, 1)).all():
            raise DomainError("gender codes must be 0 (male) or 1 (female)")

    def __len__(self):
        return len(self.ids)

    @property
    def observed(self):
        return ~np.isnan(self.outcome)

    @property
    def positive(self):
        """Region flag: True where age is at or above the positivity cutoff."""
        return self.age >= self.cutoff

    @property
    def participants(self):
        out = []
        for i in range(len(self)):
            y = self.outcome[i]
            out.append(Participant(
                id=str(self.ids[i]),
                age=int(self.age[i]),
                gender=GENDERS[self.gender[i]],
                height=float(self.height[i]),
                height_percentile=float(self.height_percentile[i]),
                outcome=None if math.isnan(y) else float(y),
                observed=not math.isnan(y),
                region=bool(self.age[i] >= self.cutoff),
                sampling_weight=float(self.weight[i]),
            ))
        return out

    def take(self, idx):
        """Rows ``idx`` (with repetition allowed) as a new cohort."""
        new = object.__new__(Cohort)
        # rows of a valid cohort are valid; skip re-validation on this hot path
        for name in _COLUMNS:
            a = getattr(self, name)[idx]
            a.flags.writeable = False
            object.__setattr__(new, name, a)
        if len(new.ids) == 0:
            raise DomainError("cohort is empty")
        object.__setattr__(new, "cutoff", self.cutoff)
        object.__setattr__(new, "age_range", self.age_range)
        object.__setattr__(new, "ingest", None)
        return new

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def from_participants(cls, participants, cutoff=8, age_range=(2, 17)):
        ps = list(participants)
        return cls(
            ids=[p.id for p in ps],
            age=[p.age for p in ps],
            gender=[GENDERS.index(p.gender) for p in ps],
            height=[p.height for p in ps],
            height_percentile=[p.height_percentile for p in ps],
            outcome=[np.nan if p.outcome is None else p.outcome for p in ps],
            weight=[p.sampling_weight for p in ps],
            cutoff=cutoff,
            age_range=age_range,
        )


def derive_outcome(readings):
    """Mean of the available readings, or None when fewer than two exist."""
    vals = [float(r) for r in readings if r is not None]
    if len(vals) > 3:
        raise ValueError("at most three readings are expected")
    if len(vals) < 2:
        return None
    return math.fsum(vals) / len(vals)


def _parse_float(text, what):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"non-numeric {what} {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite {what} {text!r}")
    return value


def parse_cohort(stream, mapping=None, cutoff=8, age_range=(2, 17), delimiter=",",
                 drop_missing_height=False):
    """Parse a delimited cohort file into a :class:`Cohort`.

    Ages are floored to integer years. Rows outside ``age_range`` and rows
    with zero sampling weight are dropped and counted in ``cohort.ingest``.
    Any malformed row raises :class:`CohortFormatError` listing every bad
    line; nothing is silently skipped.
    """
    mapping = mapping or ColumnMapping()
    reader = csv.DictReader(stream, delimiter=delimiter)
    header = reader.fieldnames or []
    wanted = [mapping.id, mapping.age, mapping.gender, mapping.height, mapping.weight, *mapping.readings]
    if mapping.height_percentile:
        wanted.append(mapping.height_percentile)
    absent = [c for c in wanted if c not in header]
    if absent:
        raise SchemaError(f"mapped column(s) not in header: {', '.join(absent)}")

    lo, hi = age_range
    cols = {k: [] for k in ("ids", "age", "gender", "height", "height_percentile", "outcome", "weight")}
    problems = []
    counts = dict(rows_read=0, dropped_out_of_range=0, dropped_zero_weight=0, dropped_missing_height=0)
    for row in reader:
        counts["rows_read"] += 1
        line = reader.line_num
        try:
            age = math.floor(_parse_float(row[mapping.age].strip(), "age"))
            weight = _parse_float(row[mapping.weight].strip(), "weight")
            if weight < 0:
                raise ValueError(f"negative weight {weight}")
            gtext = row[mapping.gender].strip().lower()
            if gtext not in mapping.gender_codes:
                raise ValueError(f"unrecognised gender {row[mapping.gender]!r}")
            gender = GENDERS.index(mapping.gender_codes[gtext])
            htext = row[mapping.height].strip()
            height = _parse_float(htext, "height") if htext else math.nan
            readings = []
            for c in mapping.readings:
                t = row[c].strip()
                if t:
                    readings.append(_parse_float(t, f"reading {c}"))
            pct = math.nan
            if mapping.height_percentile:
                t = row[mapping.height_percentile].strip()
                if t:
                    pct = _parse_float(t, "height percentile")
                    if not 0 <= pct <= 100:
                        raise ValueError(f"height percentile {pct} outside [0, 100]")
        except (ValueError, TypeError, AttributeError) as exc:
            # TypeError/AttributeError: short row yielding None cells
            problems.append((line, str(exc)))
            continue
        if not lo <= age <= hi:
            counts["dropped_out_of_range"] += 1
            continue
        if weight == 0:
            counts["dropped_zero_weight"] += 1
            continue
        if math.isnan(height) and drop_missing_height:
            counts["dropped_missing_height"] += 1
            continue
        y = derive_outcome(readings)
        cols["ids"].append(row[mapping.id].strip())
        cols["age"].append(age)
        cols["gender"].append(gender)
        cols["height"].append(height)
        cols["height_percentile"].append(pct)
        cols["outcome"].append(math.nan if y is None else y)
        cols["weight"].append(weight)
    if problems:
        raise CohortFormatError(problems)
    report = IngestReport(rows_retained=len(cols["ids"]), **counts)
    return Cohort(cutoff=cutoff, age_range=tuple(age_range), ingest=report, **cols)


def read_cohort(path, **kwargs):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_cohort(fh, **kwargs)


def empirical_height_percentile(cohort):
    """Weighted midpoint-rank height percentiles within (age, gender) strata.

    percentile = 100 * (weight strictly shorter + half the weight of ties) / stratum weight
    """
    missing = np.isnan(cohort.height)
    if missing.any():
        raise MissingHeightError(cohort.ids[missing])
    pct = np.empty(len(cohort))
    key = cohort.age * 2 + cohort.gender
    for k in np.unique(key):
        rows = np.flatnonzero(key == k)
        w = cohort.weight[rows]
        total = w.sum()
        if not total > 0:
            raise DomainError(f"stratum age={k // 2} gender={GENDERS[k % 2]} has zero weight")
        levels, inv = np.unique(cohort.height[rows], return_inverse=True)
        tie = np.bincount(inv, weights=w, minlength=len(levels))
        below = np.concatenate(([0.0], np.cumsum(tie)[:-1]))
        pct[rows] = 100.0 * (below[inv] + 0.5 * tie[inv]) / total
    return cohort.replace(height_percentile=np.clip(pct, 0.0, 100.0))


def ensure_height_percentiles(cohort):
    """Compute empirical percentiles unless every participant already has one."""
    if np.isnan(cohort.height_percentile).any():
        return empirical_height_percentile(cohort)
    return cohort


def missingness_table(cohort):
    """Per-age participant counts, weighted share and missing-outcome counts."""
    total = cohort.weight.sum()
    missing = ~cohort.observed
    rows = []
    for a in np.unique(cohort.age):
        at = cohort.age == a
        n = int(at.sum())
        n_missing = int((at & missing).sum())
        rows.append({
            "age": int(a),
            "n": n,
            "weighted_pct": 100.0 * float(cohort.weight[at].sum() / total),
            "n_missing": n_missing,
            "pct_missing": 100.0 * n_missing / n,
        })
    return rows
