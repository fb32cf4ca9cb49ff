"""Rolling attribution pipeline and result serialization.

Per window: sample moments -> graphical lasso (penalty fixed or the
2 * sqrt(ln p / N) default, with p the window's active institution count)
-> coalition cost table -> Shapley/Banzhaf attribution. Institutions
without full data inside a window drop out of that window's roster; a
window whose solve fails is recorded as a failed row, never silently
skipped.

Serialization: a CSV with header ``date,total,shapley_<name>...,
banzhaf_<name>...`` (17 significant digits, empty cells for institutions
outside the window roster, failed windows as ``# <date>,FAILED,<reason>``
comment lines), a JSON mirror, and SVG line charts of the Shapley series
and the total cost with optional event markers. CSV and JSON are
byte-deterministic for a fixed config, input and seed.
"""

from __future__ import annotations

import datetime as dt
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .covariance import ConvergenceError, EstimatorConfig, default_lambda, graphical_lasso, sample_moments
from .game import AttributionResult, InstitutionPartition, build_table, banzhaf, shapley
from .gauss import DegenerateRegionError
from .measures import RiskConfig, SolverError
from .panel import ReturnPanel, load_levels, log_returns, rolling_windows, weekly_aggregate

__all__ = [
    "ConfigError",
    "RunConfig",
    "FailedWindow",
    "AttributionSeries",
    "load_config_file",
    "run_rolling_attribution",
    "emit_outputs",
    "parse_results_csv",
    "load_annotations",
]

_NUMERIC_FAILURES = (
    ConvergenceError,
    SolverError,
    DegenerateRegionError,
    np.linalg.LinAlgError,
    ValueError,
    FloatingPointError,
)


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a rolling attribution run needs."""

    input_path: Path
    safe: tuple[str, ...]
    distressed: tuple[str, ...]
    tau1: float = 0.05
    tau2: float = 0.05
    delta: float = 1.0
    window: int = 26
    lam: float | None = None  # None -> 2 sqrt(ln p / N) per window
    weekly: bool = True
    weights: Mapping[str, float] | None = None
    out_dir: Path = Path("out")
    seed: int = 0
    annotations: Path | None = None
    normalize_charts: bool = False
    max_coalition_size: int = 20
    workers: int = 1

    def __post_init__(self):
        if not self.safe or not self.distressed:
            raise ConfigError("both --safe and --distressed must be nonempty")
        overlap = set(self.safe) & set(self.distressed)
        if overlap:
            raise ConfigError(f"institutions in both safe and distressed: {sorted(overlap)}")
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if self.lam is not None and self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "input_path", Path(self.input_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.annotations is not None:
            object.__setattr__(self, "annotations", Path(self.annotations))

    def risk_config(self) -> RiskConfig:
        return RiskConfig(
            tau1=self.tau1, tau2=self.tau2, delta=self.delta, weights=self.weights
        )


_CONFIG_KEYS = {
    "input",
    "safe",
    "distressed",
    "tau1",
    "tau2",
    "delta",
    "window",
    "lambda",
    "frequency",
    "weights",
    "out",
    "seed",
    "annotations",
    "normalize",
}


def load_config_file(path: Path | str) -> dict:
    """Flat key=value config file; '#' starts a comment line.

    Recognized keys: input, safe, distressed (comma-separated lists), tau1,
    tau2, delta, window, lambda ('default' or a number), frequency
    ('weekly' or 'daily'), weights ('name:alpha,...'), out, seed,
    annotations, normalize ('true'/'false'). Command-line flags override.
    """
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def config_from_mapping(entries: Mapping[str, str]) -> RunConfig:
    """Build a RunConfig from config-file entries (string-valued)."""
    try:
        kwargs: dict = {}
        if "input" in entries:
            kwargs["input_path"] = Path(entries["input"])
        else:
            raise ConfigError("config missing required key 'input'")
        for key, dest in (("safe", "safe"), ("distressed", "distressed")):
            if key not in entries:
                raise ConfigError(f"config missing required key {key!r}")
            kwargs[dest] = tuple(
                s.strip() for s in entries[key].split(",") if s.strip()
            )
        for key, dest, conv in (
            ("tau1", "tau1", float),
            ("tau2", "tau2", float),
            ("delta", "delta", float),
            ("window", "window", int),
            ("seed", "seed", int),
        ):
            if key in entries:
                kwargs[dest] = conv(entries[key])
        if "lambda" in entries:
            val = entries["lambda"]
            kwargs["lam"] = None if val.lower() == "default" else float(val)
        if "frequency" in entries:
            freq = entries["frequency"].lower()
            if freq not in ("weekly", "daily"):
                raise ConfigError(f"frequency must be weekly or daily, got {freq!r}")
            kwargs["weekly"] = freq == "weekly"
        if "weights" in entries:
            weights = {}
            for item in entries["weights"].split(","):
                if not item.strip():
                    continue
                name, _, alpha = item.partition(":")
                if not alpha:
                    raise ConfigError(f"weights entry {item!r} must be name:alpha")
                weights[name.strip()] = float(alpha)
            kwargs["weights"] = weights
        if "out" in entries:
            kwargs["out_dir"] = Path(entries["out"])
        if "annotations" in entries:
            kwargs["annotations"] = Path(entries["annotations"])
        if "normalize" in entries:
            kwargs["normalize_charts"] = entries["normalize"].lower() in ("true", "1", "yes")
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class FailedWindow:
    window_date: dt.date
    reason: str


@dataclass(frozen=True)
class AttributionSeries:
    """Chronological attribution results plus failed-window records."""

    distressed: tuple[str, ...]
    results: tuple[AttributionResult, ...]
    failures: tuple[FailedWindow, ...] = ()
    config_echo: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        dates = [r.window_date for r in self.results]
        if any(a >= b for a, b in zip(dates, dates[1:])):
            raise ValueError("result dates must be strictly increasing")
        for r in self.results:
            extra = set(r.distressed) - set(self.distressed)
            if extra:
                raise ValueError(f"window roster outside configured D: {sorted(extra)}")


def _config_echo(cfg: RunConfig) -> dict:
    return {
        "safe": list(cfg.safe),
        "distressed": list(cfg.distressed),
        "tau1": cfg.tau1,
        "tau2": cfg.tau2,
        "delta": cfg.delta,
        "window": cfg.window,
        "lambda": "default" if cfg.lam is None else cfg.lam,
        "frequency": "weekly" if cfg.weekly else "daily",
        "seed": cfg.seed,
    }


def _attribute_window(
    window: ReturnPanel, cfg: RunConfig, risk_cfg: RiskConfig
) -> AttributionResult | FailedWindow:
    """One window's fit and attribution; failures become FailedWindow rows.

    A solve failure anywhere inside the cost table fails the whole window:
    a partially filled table would silently bias the attribution.
    """
    date = window.dates[-1]
    active = window.institutions
    active_safe = tuple(n for n in cfg.safe if n in active)
    active_distressed = tuple(n for n in cfg.distressed if n in active)
    if not active_safe or not active_distressed:
        return FailedWindow(date, "window has no usable safe/distressed split")
    try:
        names = active_safe + active_distressed
        sub = window.select(names)
        mu, s = sample_moments(sub)
        lam = cfg.lam if cfg.lam is not None else default_lambda(len(names), cfg.window)
        model = graphical_lasso(s, EstimatorConfig(lam=lam), mu=mu, labels=names)
        part = InstitutionPartition(institutions=names, distressed=active_distressed)
        table = build_table(
            model, part, risk_cfg, max_coalition_size=cfg.max_coalition_size
        )
        return AttributionResult(
            window_date=date,
            distressed=active_distressed,
            shapley=shapley(table),
            banzhaf=banzhaf(table),
            total=float(table.costs[-1]),
        )
    except _NUMERIC_FAILURES as e:
        return FailedWindow(date, f"{type(e).__name__}: {e}")


def run_rolling_attribution(cfg: RunConfig) -> AttributionSeries:
    """Execute the full pipeline described in the module docstring.

    With cfg.workers > 1, windows are processed by a bounded thread pool
    (every input is immutable and the per-window computation is pure) and
    the rows are re-ordered by date before assembly, so the output is
    identical to a sequential run.
    """
    panel = load_levels(cfg.input_path)
    known = set(panel.institutions)
    missing = [n for n in (*cfg.safe, *cfg.distressed) if n not in known]
    if missing:
        raise ConfigError(f"institutions not found in input: {missing}")
    returns = log_returns(panel)
    if cfg.weekly:
        returns = weekly_aggregate(returns)
    relevant = tuple(
        n for n in returns.institutions if n in set(cfg.safe) | set(cfg.distressed)
    )
    returns = returns.select(relevant)
    windows = rolling_windows(returns, cfg.window)

    risk_cfg = cfg.risk_config()
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(lambda w: _attribute_window(w, cfg, risk_cfg), windows))
    else:
        rows = [_attribute_window(w, cfg, risk_cfg) for w in windows]
    rows.sort(key=lambda r: r.window_date)
    results = tuple(r for r in rows if isinstance(r, AttributionResult))
    failures = tuple(r for r in rows if isinstance(r, FailedWindow))
    return AttributionSeries(
        distressed=cfg.distressed,
        results=results,
        failures=failures,
        config_echo=_config_echo(cfg),
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _series_rows(series: AttributionSeries):
    """Chronological merge of result and failure rows."""
    rows = [(r.window_date, "result", r) for r in series.results]
    rows.extend((f.window_date, "failed", f) for f in series.failures)
    rows.sort(key=lambda item: (item[0], item[1]))
    return rows


def emit_outputs(
    series: AttributionSeries,
    out_dir: Path | str,
    *,
    annotations: Sequence[tuple[dt.date, str]] = (),
    normalize_charts: bool = False,
) -> dict[str, Path]:
    """Write attribution.csv / attribution.json / shapley.svg / total.svg.

    The CSV always carries raw attribution values; normalize_charts only
    changes the Shapley chart to per-window shares (value / window total),
    a common way to read the series as relative risk factors.
    """
    if not series.results and not series.failures:
        raise ValueError("empty attribution series")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = series.distressed

    csv_path = out / "attribution.csv"
    lines = [
        "date,total,"
        + ",".join(f"shapley_{n}" for n in names)
        + ","
        + ",".join(f"banzhaf_{n}" for n in names)
    ]
    for date, kind, row in _series_rows(series):
        if kind == "failed":
            reason = row.reason.replace("\n", " ").replace(",", ";")
            lines.append(f"# {date.isoformat()},FAILED,{reason}")
            continue
        cells = [date.isoformat(), _fmt(row.total)]
        lookup = {n: j for j, n in enumerate(row.distressed)}
        for vec in (row.shapley, row.banzhaf):
            for n in names:
                cells.append(_fmt(vec[lookup[n]]) if n in lookup else "")
        lines.append(",".join(cells))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    json_path = out / "attribution.json"
    payload = {
        "config": dict(series.config_echo),
        "distressed": list(names),
        "windows": [
            {
                "date": r.window_date.isoformat(),
                "total": r.total,
                "shapley": _vector_by_name(names, r.distressed, r.shapley),
                "banzhaf": _vector_by_name(names, r.distressed, r.banzhaf),
            }
            for r in series.results
        ],
        "failures": [
            {"date": f.window_date.isoformat(), "reason": f.reason}
            for f in series.failures
        ],
    }
    json_path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    shapley_path = out / "shapley.svg"
    total_path = out / "total.svg"
    _plot_series(series, shapley_path, total_path, annotations, normalize_charts)
    return {
        "csv": csv_path,
        "json": json_path,
        "shapley_svg": shapley_path,
        "total_svg": total_path,
    }


def _vector_by_name(
    names: Sequence[str], roster: Sequence[str], vec: np.ndarray
) -> dict[str, float | None]:
    lookup = {n: j for j, n in enumerate(roster)}
    return {n: (float(vec[lookup[n]]) if n in lookup else None) for n in names}


def _plot_series(
    series: AttributionSeries,
    shapley_path: Path,
    total_path: Path,
    annotations: Sequence[tuple[dt.date, str]],
    normalize: bool,
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dates = [r.window_date for r in series.results]
    totals = [r.total for r in series.results]

    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name in series.distressed:
        xs, ys = [], []
        for r in series.results:
            if name in r.distressed:
                value = float(r.shapley[list(r.distressed).index(name)])
                if normalize:
                    value = value / r.total if r.total != 0 else float("nan")
                xs.append(r.window_date)
                ys.append(value)
        ax.plot(xs, ys, label=name, linewidth=1.0)
    _decorate(ax, annotations)
    ax.set_ylabel("Shapley share of total" if normalize else "Shapley attribution")
    ax.legend(loc="upper left", fontsize=8, ncol=2)
    fig.autofmt_xdate()
    fig.savefig(shapley_path, format="svg", bbox_inches="tight")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(dates, totals, color="black", linewidth=1.2)
    _decorate(ax, annotations)
    ax.set_ylabel("total coalition cost")
    fig.autofmt_xdate()
    fig.savefig(total_path, format="svg", bbox_inches="tight")
    plt.close(fig)


def _decorate(ax, annotations: Sequence[tuple[dt.date, str]]) -> None:
    for date, label in annotations:
        ax.axvline(date, color="grey", linestyle="--", linewidth=0.7)
        if label:
            ax.annotate(
                label,
                xy=(date, 1.0),
                xycoords=("data", "axes fraction"),
                fontsize=6,
                rotation=90,
                va="top",
            )
    ax.grid(True, alpha=0.25)


def load_annotations(path: Path | str) -> list[tuple[dt.date, str]]:
    """Event markers from a date,label CSV; the date,label header is optional."""
    out: list[tuple[dt.date, str]] = []
    for lineno, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), 1
    ):
        line = raw.strip()
        if not line:
            continue
        datepart, _, label = line.partition(",")
        datepart = datepart.strip()
        if lineno == 1 and datepart.lower() == "date":
            continue
        try:
            date = dt.date.fromisoformat(datepart)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: malformed annotation date {datepart!r}"
            ) from None
        out.append((date, label.strip()))
    return out


def parse_results_csv(path: Path | str) -> AttributionSeries:
    """Re-read an attribution.csv; values round-trip the emitted doubles."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"empty results file {path}")
    header = text[0].split(",")
    if header[:2] != ["date", "total"]:
        raise ValueError(f"unrecognized results header in {path}")
    shap_cols = [h for h in header[2:] if h.startswith("shapley_")]
    banz_cols = [h for h in header[2:] if h.startswith("banzhaf_")]
    names = tuple(h[len("shapley_") :] for h in shap_cols)
    if tuple(h[len("banzhaf_") :] for h in banz_cols) != names:
        raise ValueError("shapley/banzhaf column sets disagree")

    results = []
    failures = []
    for line in text[1:]:
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            datepart, _, rest = body.partition(",")
            failures.append(
                FailedWindow(
                    dt.date.fromisoformat(datepart.strip()),
                    rest.partition(",")[2],
                )
            )
            continue
        cells = line.split(",")
        date = dt.date.fromisoformat(cells[0])
        total = float(cells[1])
        shap_cells = cells[2 : 2 + len(names)]
        banz_cells = cells[2 + len(names) : 2 + 2 * len(names)]
        roster = tuple(n for n, c in zip(names, shap_cells) if c != "")
        phi = np.array([float(c) for c in shap_cells if c != ""])
        beta = np.array([float(c) for c in banz_cells if c != ""])
        results.append(
            AttributionResult(
                window_date=date,
                distressed=roster,
                shapley=phi,
                banzhaf=beta,
                total=total,
            )
        )
    return AttributionSeries(
        distressed=names, results=tuple(results), failures=tuple(failures)
    )
