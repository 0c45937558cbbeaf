"""Regenerate the synthetic fixtures shipped in data/.

data/reference_sbp_synthetic.csv  smooth illustrative reference table
data/synthetic_cohort.csv         2,572-row cohort laid out like the
                                  2017-2018 NHANES analysis sample: same
                                  per-age counts, missing counts and weighted
                                  age shares, outcomes drawn from the
                                  synthetic reference table

Neither file contains real survey or published clinical values.

    python scripts/make_synthetic_data.py [--seed 20250101]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from synthmean.reference import dump_reference_table
from synthmean.synthetic import simulate_cohort, synthetic_reference_table, write_cohort_csv

DATA = Path(__file__).resolve().parents[1] / "data"

# age: (participants, weighted %, missing)
LAYOUT = {
    2: (197, 5.3, 197), 3: (157, 6.2, 157), 4: (168, 6.1, 168), 5: (166, 5.9, 166),
    6: (147, 5.7, 147), 7: (153, 5.3, 153), 8: (183, 6.6, 15), 9: (190, 7.2, 25),
    10: (183, 6.2, 16), 11: (168, 6.3, 16), 12: (144, 6.1, 15), 13: (143, 6.9, 11),
    14: (153, 6.9, 11), 15: (127, 5.5, 9), 16: (149, 7.2, 6), 17: (144, 6.6, 10),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20250101)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    table = synthetic_reference_table()
    with open(DATA / "reference_sbp_synthetic.csv", "w", newline="", encoding="utf-8") as fh:
        dump_reference_table(table, fh)

    ages = np.concatenate([np.full(n, a) for a, (n, _, _) in LAYOUT.items()])
    observed = np.ones(len(ages), dtype=bool)
    for a, (n, _, n_missing) in LAYOUT.items():
        rows = np.flatnonzero(ages == a)
        observed[rng.choice(rows, size=n_missing, replace=False)] = False
    cohort = simulate_cohort(table, len(ages), rng, ages=ages, observed=observed)

    # rescale weights so each age carries exactly its weighted share
    w = cohort.weight.copy()
    for a, (_, pct, _) in LAYOUT.items():
        at = cohort.age == a
        w[at] *= pct * 1000.0 / w[at].sum()
    cohort = cohort.replace(weight=w)

    path = DATA / "synthetic_cohort.csv"
    write_cohort_csv(cohort, path, rng)
    # rows outside the analysed age range, dropped at ingest
    with open(path, "a", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["X00001", 1, "female", "80.2", "", "", "", "3120.5"])
        out.writerow(["X00002", 18, "male", "176.0", "118", "116", "120", "4410.0"])
        out.writerow(["X00003", 19, "female", "163.1", "110", "108", "", "3901.2"])
    print(f"wrote {path} and {DATA / 'reference_sbp_synthetic.csv'}")


if __name__ == "__main__":
    main()
