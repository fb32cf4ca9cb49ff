#!/usr/bin/env python3
"""Generate a synthetic daily CDS-style levels CSV for pipeline demos.

Eight institutions with CDS-like volatilities and a common cross
correlation; one (GR-style) column optionally ends mid-sample to exercise
the roster mechanism.
"""

import argparse
from pathlib import Path

import numpy as np

from coalrisk.synthetic import equicorrelated_sigma, gaussian_levels_panel

LABELS = ["DE", "BE", "FR", "GR", "IT", "NL", "PT", "ES"]
VOLS = [3.4, 2.7, 3.2, 5.2, 4.2, 3.0, 4.3, 4.1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("synthetic_levels.csv"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--days", type=int, default=331 * 5)
    ap.add_argument("--corr", type=float, default=0.5)
    ap.add_argument(
        "--truncate",
        default=None,
        help="name of one institution to cut at 60%% of the sample",
    )
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    sigma = equicorrelated_sigma(len(LABELS), args.corr, VOLS)
    panel = gaussian_levels_panel(
        rng, LABELS, np.zeros(len(LABELS)), sigma, n_days=args.days
    )
    values = panel.values.copy()
    if args.truncate:
        j = LABELS.index(args.truncate)
        cut = int(values.shape[0] * 0.6)
        values[cut:, j] = np.nan

    lines = ["date," + ",".join(LABELS)]
    for date, row in zip(panel.dates, values):
        cells = ["" if np.isnan(v) else f"{v:.10f}" for v in row]
        lines.append(date.isoformat() + "," + ",".join(cells))
    args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({values.shape[0]} days x {len(LABELS)} institutions)")


if __name__ == "__main__":
    main()
