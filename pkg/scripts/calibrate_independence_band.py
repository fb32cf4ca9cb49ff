#!/usr/bin/env python3
"""Calibrate the independence-null noise band.

When the safe block is exactly independent of the distressed block, every
coalition cost is zero under the true model. With a covariance *estimated*
from N=26 draws, sampling noise leaks through the penalized fit; this
script measures how much, over many seeded replications, so the test suite
can pin a band with headroom.

Two variants are measured:
  * library-level: 26 weekly-scale returns drawn directly, moments +
    graphical lasso (default penalty) + full coalition table;
  * pipeline-level: a daily levels panel through the CSV -> weekly ->
    rolling machinery (as in the CLI), collecting all window totals.
"""

import argparse
import datetime as dt
import tempfile
from pathlib import Path

import numpy as np

from coalrisk.covariance import EstimatorConfig, default_lambda, graphical_lasso, sample_moments
from coalrisk.game import InstitutionPartition, build_table
from coalrisk.measures import RiskConfig
from coalrisk.panel import ReturnPanel
from coalrisk.pipeline import RunConfig, run_rolling_attribution
from coalrisk.synthetic import (
    block_diagonal_sigma,
    business_days,
    equicorrelated_sigma,
    gaussian_levels_panel,
)

LABELS = ("S0", "D1", "D2", "D3")


def true_sigma() -> np.ndarray:
    return block_diagonal_sigma(
        [np.array([[1.0]]), equicorrelated_sigma(3, 0.4, 1.0)]
    )


def library_total(seed: int, n: int = 26) -> float:
    rng = np.random.default_rng(seed)
    draws = rng.multivariate_normal(np.zeros(4), true_sigma(), size=n)
    window = ReturnPanel(
        dates=business_days(dt.date(2010, 1, 4), n),
        institutions=LABELS,
        values=draws,
        kind="returns",
    )
    mu, s = sample_moments(window)
    model = graphical_lasso(
        s, EstimatorConfig(lam=default_lambda(4, n)), mu=mu, labels=LABELS
    )
    part = InstitutionPartition(institutions=LABELS, distressed=LABELS[1:])
    table = build_table(model, part, RiskConfig())
    return float(table.costs[-1])


def pipeline_totals(seed: int) -> list[float]:
    rng = np.random.default_rng(seed)
    panel = gaussian_levels_panel(
        rng, LABELS, np.zeros(4), true_sigma(), n_days=40 * 5
    )
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "levels.csv"
        lines = ["date," + ",".join(LABELS)]
        for d, row in zip(panel.dates, panel.values):
            lines.append(d.isoformat() + "," + ",".join(f"{v:.10f}" for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        cfg = RunConfig(
            input_path=path, safe=("S0",), distressed=LABELS[1:], window=26
        )
        series = run_rolling_attribution(cfg)
    return [r.total for r in series.results]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    args = ap.parse_args()

    lib = np.array([library_total(seed) for seed in range(args.runs)])
    print(f"library-level |total| over {args.runs} seeded runs:")
    print(f"  max={np.abs(lib).max():.6g}  q99={np.quantile(np.abs(lib), 0.99):.6g}")
    print(f"  q95={np.quantile(np.abs(lib), 0.95):.6g}  share zero={np.mean(lib == 0):.3f}")

    pipe = np.concatenate([pipeline_totals(seed) for seed in range(20)])
    print(f"pipeline-level |total| over {pipe.size} windows (20 seeds):")
    print(f"  max={np.abs(pipe).max():.6g}  q99={np.quantile(np.abs(pipe), 0.99):.6g}")


if __name__ == "__main__":
    main()
