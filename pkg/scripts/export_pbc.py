"""Export the Mayo PBC sequential data (``survival::pbcseq``) to long-format CSV.

Times are converted from days to years. Death is the event; transplantation
and end of follow-up are both censoring. Requires the ``data`` extra
(``rdatasets``, which bundles the R dataset offline and returns pandas frames).

Usage::

    python scripts/export_pbc.py data/pbc_long.csv
"""

from __future__ import annotations

import argparse

import numpy as np
import rdatasets

DAYS_PER_YEAR = 365.25


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", nargs="?", default="data/pbc_long.csv")
    args = parser.parse_args(argv)

    df = rdatasets.data("survival", "pbcseq").sort_values(["id", "day"], kind="stable")
    out = df.assign(
        time=df["day"] / DAYS_PER_YEAR,
        event_time=df["futime"] / DAYS_PER_YEAR,
        death=(df["status"] == 2).astype(int),
        log_bili=np.log(df["bili"]),
        log_albumin=np.log(df["albumin"]),
        log_protime=np.log(df["protime"]),
    )[["id", "time", "event_time", "death", "log_bili", "log_albumin", "log_protime", "age"]]
    out.to_csv(args.out, index=False, float_format="%.10g")
    per_subject = out.groupby("id").first()
    print(f"wrote {len(out)} rows for {len(per_subject)} subjects "
          f"({int(per_subject['death'].sum())} deaths) to {args.out}")


if __name__ == "__main__":
    main()
