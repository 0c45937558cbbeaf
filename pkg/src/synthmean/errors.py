"""Exception hierarchy shared across the package."""


class SynthMeanError(Exception):
    """Base class for all package errors."""


class SchemaError(SynthMeanError):
    """A mapped column is missing from the input header."""


class CohortFormatError(SynthMeanError):
    """One or more input rows could not be parsed."""

    def __init__(self, problems):
        self.problems = list(problems)
        shown = "; ".join(f"line {line}: {msg}" for line, msg in self.problems[:10])
        more = len(self.problems) - 10
        if more > 0:
            shown += f"; ... and {more} more"
        super().__init__(f"{len(self.problems)} malformed row(s): {shown}")


class MissingHeightError(SynthMeanError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(f"height missing for {len(self.ids)} participant(s): {', '.join(self.ids[:20])}")


class ReferenceTableError(SynthMeanError):
    """The external reference table is malformed."""


class EstimationError(SynthMeanError):
    """An estimator cannot be evaluated on the given data.

    Bootstrap replicates that raise a subclass of this are counted as failures
    rather than aborting the run.
    """


class DomainError(EstimationError, ValueError):
    pass


class PositivityError(EstimationError):
    def __init__(self, ages):
        self.ages = sorted(int(a) for a in ages)
        super().__init__(
            "no observed outcomes at age(s) " + ", ".join(map(str, self.ages))
            + "; saturated coefficients are not estimable there"
        )


class ExtrapolationError(EstimationError):
    def __init__(self, ages):
        self.ages = sorted(int(a) for a in ages)
        super().__init__(
            "saturated model has no coefficient for age(s) " + ", ".join(map(str, self.ages))
        )


class CoverageError(EstimationError):
    def __init__(self, strata):
        self.strata = sorted(strata)
        shown = ", ".join(f"({a}, {g})" for a, g in self.strata)
        super().__init__(f"reference table does not cover stratum/strata {shown}")


class BootstrapError(SynthMeanError):
    """Too many bootstrap replicates failed."""
