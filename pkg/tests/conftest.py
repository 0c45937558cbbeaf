import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from synthmean.cohort import Cohort
from synthmean.reference import ReferenceRow, ReferenceTable, read_reference_table
from synthmean.synthetic import synthetic_reference_table

hypothesis.settings.register_profile("ci", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=15)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "NOT RUN"}[rep.outcome]
        text = mark.args[1]
        if rep.skipped and isinstance(rep.longrepr, tuple):
            text += f" [{rep.longrepr[2].removeprefix('Skipped: ')}]"
        _acceptance.append((str(mark.args[0]), text, status))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, status in _acceptance:
        terminalreporter.write_line(f"criterion {number:<4} {status:<7} {text}")


@pytest.fixture(scope="session")
def synth_table():
    return synthetic_reference_table()


@pytest.fixture(scope="session")
def shipped_table():
    return read_reference_table(DATA / "reference_sbp_synthetic.csv")


def make_cohort(rows, cutoff=8, age_range=(2, 17)):
    """rows: (age, gender_code, outcome or None, weight[, height_percentile])"""
    rows = list(rows)
    return Cohort(
        ids=[f"T{i}" for i in range(len(rows))],
        age=[r[0] for r in rows],
        gender=[r[1] for r in rows],
        height=[100.0 + i for i in range(len(rows))],
        height_percentile=[r[4] if len(r) > 4 else 50.0 for r in rows],
        outcome=[np.nan if r[2] is None else r[2] for r in rows],
        weight=[r[3] for r in rows],
        cutoff=cutoff,
        age_range=age_range,
    )


def narrow_table(ages=range(1, 18), p50=100.0, sd=1e-6, brackets=(50.0,)):
    """Reference table with near-degenerate normals at ``p50`` (dict age->value or float)."""
    from synthmean.reference import Z90

    rows = []
    for a in ages:
        m = p50[a] if isinstance(p50, dict) else p50
        for g in ("male", "female"):
            for b in brackets:
                rows.append(ReferenceRow(a, g, b, m, m + sd * Z90))
    return ReferenceTable(rows)
