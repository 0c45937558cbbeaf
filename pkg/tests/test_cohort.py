import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from synthmean.cohort import (
    ColumnMapping,
    Participant,
    derive_outcome,
    empirical_height_percentile,
    missingness_table,
    parse_cohort,
    read_cohort,
)
from synthmean.errors import CohortFormatError, MissingHeightError, SchemaError

from conftest import DATA, make_cohort

HEADER = "id,age,gender,height_cm,reading1,reading2,reading3,weight\n"

# per-age (n, n_missing) of the 2017-2018 analysis sample
TABLE1 = {
    2: (197, 197), 3: (157, 157), 4: (168, 168), 5: (166, 166), 6: (147, 147), 7: (153, 153),
    8: (183, 15), 9: (190, 25), 10: (183, 16), 11: (168, 16), 12: (144, 15), 13: (143, 11),
    14: (153, 11), 15: (127, 9), 16: (149, 6), 17: (144, 10),
}


def parse(text, **kw):
    return parse_cohort(io.StringIO(HEADER + text), **kw)


class TestDeriveOutcome:
    def test_mean_of_three(self):
        assert derive_outcome([100, 102, 104]) == 102

    def test_single_reading_is_missing(self):
        assert derive_outcome([110]) is None

    def test_empty_is_missing(self):
        assert derive_outcome([]) is None

    def test_two_readings(self):
        assert derive_outcome([100, 105]) == 102.5

    @given(st.lists(st.floats(40, 250), min_size=0, max_size=3), st.randoms())
    def test_permutation_invariant(self, readings, rnd):
        shuffled = list(readings)
        rnd.shuffle(shuffled)
        assert derive_outcome(readings) == derive_outcome(shuffled)


class TestParse:
    def test_young_child_without_readings(self):
        c = parse("a,5,male,110,,,,1000\n")
        p = c.participants[0]
        assert not p.region and not p.observed and p.outcome is None

    def test_out_of_range_dropped(self):
        c = parse("a,20,male,170,110,112,,1000\nb,9,female,130,100,102,,900\n")
        assert len(c) == 1
        assert c.ingest.dropped_out_of_range == 1
        assert c.ingest.rows_read == 2

    def test_zero_weight_dropped(self):
        c = parse("a,9,male,130,100,102,,0\nb,9,female,130,100,102,,900\n")
        assert len(c) == 1 and c.ingest.dropped_zero_weight == 1

    def test_age_floored(self):
        c = parse("a,8.9,male,130,100,102,,1\n")
        assert c.age[0] == 8 and c.positive[0]

    def test_region_and_outcome(self):
        c = parse("a,8,female,130,100,104,,1\nb,7,male,120,,,,1\n")
        assert list(c.positive) == [True, False]
        assert c.outcome[0] == 102 and math.isnan(c.outcome[1])

    def test_malformed_rows_report_line_numbers(self):
        with pytest.raises(CohortFormatError) as err:
            parse("a,9,male,130,100,102,,heavy\nb,9,male,130,100,102,,1\nc,x,male,130,,,,1\n")
        lines = [line for line, _ in err.value.problems]
        assert lines == [2, 4]

    def test_negative_weight_is_malformed(self):
        with pytest.raises(CohortFormatError):
            parse("a,9,male,130,100,102,,-1\n")

    def test_unknown_gender_is_malformed(self):
        with pytest.raises(CohortFormatError):
            parse("a,9,other,130,100,102,,1\n")

    def test_missing_column_is_fatal(self):
        with pytest.raises(SchemaError):
            parse_cohort(io.StringIO("id,age,gender\na,9,male\n"))

    def test_gender_codes_and_mapping(self):
        text = "SEQN;RIDAGEYR;RIAGENDR;BMXHT;S1;S2;S3;W\n1;9;1;130;100;102;;5\n2;10;2;131;;;;5\n"
        mapping = ColumnMapping(id="SEQN", age="RIDAGEYR", gender="RIAGENDR", height="BMXHT",
                                readings=("S1", "S2", "S3"), weight="W")
        c = parse_cohort(io.StringIO(text), mapping=mapping, delimiter=";")
        assert list(c.gender) == [0, 1]

    def test_precomputed_percentile_column(self):
        text = "id,age,gender,height_cm,r1,r2,pct,weight\na,9,male,130,100,102,37.5,1\n"
        mapping = ColumnMapping(readings=("r1", "r2"), height_percentile="pct")
        c = parse_cohort(io.StringIO(text), mapping=mapping)
        assert c.height_percentile[0] == 37.5

    def test_missing_height_kept_or_dropped(self):
        text = "a,5,male,,,,,1\nb,9,male,130,100,102,,1\n"
        assert len(parse(text)) == 2
        c = parse(text, drop_missing_height=True)
        assert len(c) == 1 and c.ingest.dropped_missing_height == 1

    def test_cohort_is_immutable(self):
        c = parse("a,9,male,130,100,102,,1\n")
        with pytest.raises(ValueError):
            c.weight[0] = 5.0

    def test_participant_invariant(self):
        with pytest.raises(ValueError):
            Participant("x", 9, "male", 130.0, 50.0, None, True, True, 1.0)


class TestHeightPercentile:
    def test_single_participant(self):
        c = empirical_height_percentile(make_cohort([(9, 0, 100.0, 1.0)]))
        assert c.height_percentile[0] == 50.0

    def test_two_equal_weights(self):
        c = make_cohort([(9, 0, 100.0, 1.0), (9, 0, 100.0, 1.0)]).replace(height=[100.0, 120.0])
        assert list(empirical_height_percentile(c).height_percentile) == [25.0, 75.0]

    def test_three_tied(self):
        c = make_cohort([(9, 0, 100.0, 1.0)] * 3).replace(height=[110.0] * 3)
        assert list(empirical_height_percentile(c).height_percentile) == [50.0] * 3

    def test_strata_are_separate(self):
        c = make_cohort([(9, 0, 1.0, 1.0), (9, 1, 1.0, 1.0), (10, 0, 1.0, 1.0)])
        assert list(empirical_height_percentile(c).height_percentile) == [50.0] * 3

    def test_weighted_ranks(self):
        c = make_cohort([(9, 0, 1.0, 1.0), (9, 0, 1.0, 3.0)]).replace(height=[100.0, 120.0])
        # shorter: 0.5*1/4; taller: (1 + 0.5*3)/4
        assert list(empirical_height_percentile(c).height_percentile) == [12.5, 62.5]

    def test_missing_height_lists_ids(self):
        c = make_cohort([(5, 0, None, 1.0), (9, 0, 1.0, 1.0)]).replace(height=[np.nan, 120.0])
        with pytest.raises(MissingHeightError) as err:
            empirical_height_percentile(c)
        assert err.value.ids == ["T0"]

    @given(
        st.lists(st.tuples(st.integers(8, 10), st.integers(0, 1), st.floats(80, 180),
                           st.floats(0.1, 100)), min_size=1, max_size=30),
        st.floats(0.01, 1000),
    )
    def test_invariant_to_weight_rescaling(self, rows, c):
        cohort = make_cohort([(a, g, 1.0, w) for a, g, _, w in rows]).replace(
            height=[h for _, _, h, _ in rows])
        p1 = empirical_height_percentile(cohort).height_percentile
        p2 = empirical_height_percentile(cohort.replace(weight=cohort.weight * c)).height_percentile
        np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-10)
        assert np.all((p1 >= 0) & (p1 <= 100))


class TestMissingnessTable:
    def test_no_missing(self):
        c = make_cohort([(9, 0, 100.0, 1.0), (10, 1, 101.0, 2.0)])
        assert all(r["pct_missing"] == 0 for r in missingness_table(c))

    @given(st.lists(st.tuples(st.integers(2, 17), st.booleans(), st.floats(0.1, 1e4)),
                    min_size=1, max_size=50))
    def test_weighted_pct_sums_to_100(self, rows):
        c = make_cohort([(a, 0, 100.0 if obs else None, w) for a, obs, w in rows])
        total = sum(r["weighted_pct"] for r in missingness_table(c))
        assert abs(total - 100) < 0.1

    def test_synthetic_fixture_layout(self):
        """The shipped fixture reproduces the per-age layout it was built from."""
        c = read_cohort(DATA / "synthetic_cohort.csv")
        assert len(c) == 2572
        assert c.ingest.dropped_out_of_range == 3
        table = {r["age"]: r for r in missingness_table(c)}
        for age, (n, n_missing) in TABLE1.items():
            assert table[age]["n"] == n
            assert table[age]["n_missing"] == n_missing
            assert table[age]["pct_missing"] == pytest.approx(100 * n_missing / n)
        assert round(table[9]["pct_missing"], 1) == 13.2
        assert round(table[16]["weighted_pct"], 1) == 7.2
