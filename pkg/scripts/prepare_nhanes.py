"""Convert downloaded NHANES 2017-2018 public files to the cohort CSV schema.

Download DEMO_J.XPT, BPX_J.XPT and BMX_J.XPT from the CDC NHANES site
(2017-2018 cycle, Demographics / Examination) and run

    python scripts/prepare_nhanes.py DEMO_J.XPT BPX_J.XPT BMX_J.XPT \
        --output data/nhanes_cohort.csv

Choices made here (not by the library):

* participants aged 2-17 at screening (RIDAGEYR), examined at the mobile
  examination centre (WTMEC2YR > 0; unexamined rows carry weight 0);
* sampling weight is the two-year MEC examination weight WTMEC2YR;
* readings are BPXSY1-BPXSY3; BPXSY4 (taken only when an earlier reading
  failed) substitutes for the first missing one of those three;
* participants without standing height (BMXHT) are dropped unless
  ``--keep-missing-height`` is given; the library needs height to assign a
  height percentile to the nonpositive region.

Requires pandas (``pip install synthmean[scripts]``).
"""
import argparse

import numpy as np
import pandas as pd


def load(demo, bpx, bmx, keep_missing_height=False):
    d = pd.read_sas(demo, format="xport")[["SEQN", "RIDAGEYR", "RIAGENDR", "WTMEC2YR"]]
    b = pd.read_sas(bpx, format="xport")[["SEQN", "BPXSY1", "BPXSY2", "BPXSY3", "BPXSY4"]]
    h = pd.read_sas(bmx, format="xport")[["SEQN", "BMXHT"]]
    df = d.merge(b, on="SEQN", how="left").merge(h, on="SEQN", how="left")
    df = df[(df.RIDAGEYR >= 2) & (df.RIDAGEYR <= 17) & (df.WTMEC2YR > 0)]
    if not keep_missing_height:
        df = df[df.BMXHT.notna()]

    readings = df[["BPXSY1", "BPXSY2", "BPXSY3"]].to_numpy(copy=True)
    fourth = df["BPXSY4"].to_numpy()
    for i in np.flatnonzero(~np.isnan(fourth)):
        gaps = np.flatnonzero(np.isnan(readings[i]))
        if len(gaps):
            readings[i, gaps[0]] = fourth[i]

    out = pd.DataFrame({
        "id": df.SEQN.astype(int).astype(str).to_numpy(),
        "age": df.RIDAGEYR.astype(int).to_numpy(),
        "gender": np.where(df.RIAGENDR.to_numpy() == 1, "male", "female"),
        "height_cm": df.BMXHT.to_numpy(),
        "reading1": readings[:, 0],
        "reading2": readings[:, 1],
        "reading3": readings[:, 2],
        "weight": df.WTMEC2YR.to_numpy(),
    })
    return out.sort_values("id", key=lambda s: s.astype(int), kind="stable")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("demo")
    ap.add_argument("bpx")
    ap.add_argument("bmx")
    ap.add_argument("--output", default="data/nhanes_cohort.csv")
    ap.add_argument("--keep-missing-height", action="store_true")
    args = ap.parse_args()
    df = load(args.demo, args.bpx, args.bmx, args.keep_missing_height)
    df.to_csv(args.output, index=False, float_format="%.10g")
    n_obs = (df[["reading1", "reading2", "reading3"]].notna().sum(axis=1) >= 2).sum()
    print(f"wrote {args.output}: {len(df)} participants, {n_obs} with an outcome")


if __name__ == "__main__":
    main()
