"""Panel ingestion and return transformations.

A ReturnPanel is an immutable dated matrix of institution-level observations,
either price levels (e.g. CDS spreads in basis points) or log returns scaled
by 100. Institutions may enter or leave the sample; availability is encoded
as leading/trailing NaN blocks per column, and interior gaps are rejected
rather than imputed (silent imputation would corrupt downstream covariance
estimates).

Input CSV contract: UTF-8, header row ``date,<name1>,...,<namep>``, first
column ISO-8601 dates (YYYY-MM-DD) strictly increasing, numeric cells, empty
cells only at the start or end of a column.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

__all__ = [
    "PanelParseError",
    "ReturnPanel",
    "InstitutionStats",
    "SummaryStats",
    "load_levels",
    "log_returns",
    "weekly_aggregate",
    "rolling_windows",
    "summary_stats",
]


class PanelParseError(ValueError):
    """Malformed input data; message carries the offending row/column."""


@dataclass(frozen=True)
class ReturnPanel:
    """Dated observation matrix with per-institution availability windows.

    values[t, j] is NaN exactly when institution j is not yet / no longer in
    the sample at dates[t]; inside its availability range every value is
    finite.
    """

    dates: tuple[dt.date, ...]
    institutions: tuple[str, ...]
    values: np.ndarray
    kind: str = "levels"
    frequency: str = "daily"

    def __post_init__(self):
        if self.kind not in ("levels", "returns"):
            raise ValueError(f"kind must be 'levels' or 'returns', got {self.kind!r}")
        if self.frequency not in ("daily", "weekly"):
            raise ValueError(
                f"frequency must be 'daily' or 'weekly', got {self.frequency!r}"
            )
        dates = tuple(self.dates)
        institutions = tuple(str(name) for name in self.institutions)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(dates), len(institutions)):
            raise ValueError(
                f"values shape {values.shape} inconsistent with "
                f"{len(dates)} dates x {len(institutions)} institutions"
            )
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise PanelParseError(f"dates not strictly increasing at {a} -> {b}")
        if len(set(institutions)) != len(institutions):
            raise PanelParseError("duplicate institution names in header")

        avail = []
        for j, name in enumerate(institutions):
            col = values[:, j]
            finite = np.isfinite(col)
            nan = np.isnan(col)
            if not np.all(finite | nan):
                raise ValueError(f"non-finite value in column {name!r}")
            idx = np.flatnonzero(finite)
            if idx.size == 0:
                raise ValueError(f"institution {name!r} has no observations")
            first, last = int(idx[0]), int(idx[-1])
            if idx.size != last - first + 1:
                raise PanelParseError(
                    f"institution {name!r} has interior missing values; "
                    "gaps are rejected, not imputed"
                )
            avail.append((first, last))

        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "institutions", institutions)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_avail", tuple(avail))

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def availability(self) -> Mapping[str, tuple[dt.date, dt.date]]:
        """First and last observed date per institution."""
        return {
            name: (self.dates[f], self.dates[l])
            for name, (f, l) in zip(self.institutions, self._avail)
        }

    def column(self, name: str) -> np.ndarray:
        """Observed values (availability range only) for one institution."""
        j = self.institutions.index(name)
        f, l = self._avail[j]
        return self.values[f : l + 1, j]

    def select(self, names: Iterable[str]) -> "ReturnPanel":
        """Sub-panel restricted to the given institutions, order preserved."""
        names = tuple(names)
        idx = [self.institutions.index(n) for n in names]
        return ReturnPanel(
            dates=self.dates,
            institutions=names,
            values=self.values[:, idx],
            kind=self.kind,
            frequency=self.frequency,
        )


def _open_source(source) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    return source


def load_levels(source) -> ReturnPanel:
    """Parse a levels CSV (path, bytes, or text stream) into a ReturnPanel.

    Availability per institution is inferred from the first and last
    non-empty cell of its column. Raises PanelParseError with row/column
    location on malformed dates, non-numeric cells, duplicate dates or
    duplicate institution names.
    """
    stream = _open_source(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelParseError("empty input: missing header row") from None
        if len(header) < 2 or header[0].strip().lower() != "date":
            raise PanelParseError(
                "header must be 'date,<name1>,...,<namep>', got "
                f"{','.join(header)!r}"
            )
        names = [cell.strip() for cell in header[1:]]
        if any(not n for n in names):
            raise PanelParseError("blank institution name in header")
        if len(set(names)) != len(names):
            raise PanelParseError("duplicate institution name in header")

        dates: list[dt.date] = []
        rows: list[list[float]] = []
        seen: set[dt.date] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names) + 1:
                raise PanelParseError(
                    f"row {lineno}: expected {len(names) + 1} cells, got {len(row)}"
                )
            try:
                date = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise PanelParseError(
                    f"row {lineno}: malformed date {row[0]!r} (want YYYY-MM-DD)"
                ) from None
            if date in seen:
                raise PanelParseError(f"row {lineno}: duplicate date {date}")
            if dates and date < dates[-1]:
                raise PanelParseError(
                    f"row {lineno}: dates not sorted ({date} after {dates[-1]})"
                )
            seen.add(date)
            parsed = []
            for j, cell in enumerate(row[1:]):
                cell = cell.strip()
                if not cell:
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise PanelParseError(
                        f"row {lineno}, column {names[j]!r}: "
                        f"non-numeric cell {cell!r}"
                    ) from None
            dates.append(date)
            rows.append(parsed)
        if not rows:
            raise PanelParseError("no data rows")
        return ReturnPanel(
            dates=tuple(dates),
            institutions=tuple(names),
            values=np.array(rows, dtype=float),
            kind="levels",
        )
    finally:
        if isinstance(source, (str, Path, bytes, bytearray)):
            stream.close()


def log_returns(panel: ReturnPanel) -> ReturnPanel:
    """Scaled log returns: 100 * ln(level_t / level_{t-1}) per institution.

    The first available date of each institution is consumed as the base
    observation; leading all-NaN rows are dropped from the result. Raises on
    nonpositive levels, naming the institution and date.
    """
    if panel.kind != "levels":
        raise ValueError("log_returns expects a levels panel")
    values = panel.values
    for j, name in enumerate(panel.institutions):
        f, l = panel._avail[j]
        col = values[f : l + 1, j]
        bad = np.flatnonzero(col <= 0.0)
        if bad.size:
            t = f + int(bad[0])
            raise ValueError(
                f"nonpositive level for {name!r} on {panel.dates[t]}: "
                f"{values[t, j]}"
            )
    out = np.full_like(values, math.nan)
    out[1:, :] = 100.0 * (np.log(values[1:, :]) - np.log(values[:-1, :]))
    keep = ~np.all(np.isnan(out), axis=1)
    # only leading rows can be all-NaN; interior gaps are impossible by
    # construction of the input panel
    return ReturnPanel(
        dates=tuple(d for d, k in zip(panel.dates, keep) if k),
        institutions=panel.institutions,
        values=out[keep],
        kind="returns",
        frequency=panel.frequency,
    )


def _iso_week_groups(dates: Iterable[dt.date]) -> list[list[int]]:
    groups: list[list[int]] = []
    current_key = None
    for t, date in enumerate(dates):
        key = date.isocalendar()[:2]
        if key != current_key:
            groups.append([])
            current_key = key
        groups[-1].append(t)
    return groups


def weekly_aggregate(panel: ReturnPanel) -> ReturnPanel:
    """Collapse a daily panel to ISO-8601 weeks.

    Levels keep the last available observation of each week; returns are
    summed within each week (additivity of log returns makes the two routes
    agree wherever both are defined). Each week is dated by the last panel
    date it contains; weeks with no observation for an institution stay NaN
    at the availability edges.
    """
    if panel.frequency != "daily":
        raise ValueError("weekly_aggregate expects a daily panel")
    if panel.n_dates == 0:
        raise ValueError("empty panel")
    groups = _iso_week_groups(panel.dates)
    week_dates = tuple(panel.dates[g[-1]] for g in groups)
    p = len(panel.institutions)
    out = np.full((len(groups), p), math.nan)
    for w, g in enumerate(groups):
        block = panel.values[g, :]
        for j in range(p):
            col = block[:, j]
            obs = col[np.isfinite(col)]
            if obs.size == 0:
                continue
            out[w, j] = obs[-1] if panel.kind == "levels" else obs.sum()
    return ReturnPanel(
        dates=week_dates,
        institutions=panel.institutions,
        values=out,
        kind=panel.kind,
        frequency="weekly",
    )


def rolling_windows(panel: ReturnPanel, n: int) -> list[ReturnPanel]:
    """All contiguous n-row windows, one per terminal date.

    Institutions without full availability across a window are dropped from
    that window (they re-enter later windows if available again at the
    edges).
    """
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    if panel.n_dates < n:
        raise ValueError(
            f"panel has {panel.n_dates} rows, fewer than window length {n}"
        )
    windows = []
    for end in range(n - 1, panel.n_dates):
        sl = slice(end - n + 1, end + 1)
        block = panel.values[sl, :]
        full = np.flatnonzero(np.all(np.isfinite(block), axis=0))
        windows.append(
            ReturnPanel(
                dates=panel.dates[sl.start : sl.stop],
                institutions=tuple(panel.institutions[j] for j in full),
                values=block[:, full],
                kind=panel.kind,
                frequency=panel.frequency,
            )
        )
    return windows


@dataclass(frozen=True)
class InstitutionStats:
    """Summary row for one institution on the x100 log-return scale.

    Conventions: std_dev uses the n-1 sample denominator; skewness and
    kurtosis are moment-based (kurtosis raw, normal = 3); q01 is the 1%
    empirical quantile with linear interpolation between order statistics;
    jb = n/6 * (skew^2 + (kurt - 3)^2 / 4). A constant series reports
    std_dev 0 and NaN (undefined) skewness/kurtosis/jb.
    """

    minimum: float
    maximum: float
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float
    q01: float
    jb: float

    def __post_init__(self):
        if not self.minimum <= self.q01 <= self.maximum:
            raise ValueError("q01 outside [min, max]")
        if self.std_dev < 0:
            raise ValueError("negative std_dev")
        if not math.isnan(self.jb) and self.jb < 0:
            raise ValueError("negative jb")


@dataclass(frozen=True)
class SummaryStats:
    """Per-institution summary statistics plus the sampling frequency."""

    frequency: str
    stats: Mapping[str, InstitutionStats]


def summary_stats(panel: ReturnPanel) -> SummaryStats:
    """Table-style summary of a returns panel (see InstitutionStats)."""
    if panel.kind != "returns":
        raise ValueError("summary_stats expects a returns panel")
    out: dict[str, InstitutionStats] = {}
    for name in panel.institutions:
        x = panel.column(name)
        n = x.size
        if n < 4:
            raise ValueError(f"institution {name!r} has {n} < 4 observations")
        mean = float(np.mean(x))
        centered = x - mean
        m2 = float(np.mean(centered**2))
        if m2 == 0.0:
            skew = kurt = jb = math.nan
            std = 0.0
        else:
            m3 = float(np.mean(centered**3))
            m4 = float(np.mean(centered**4))
            skew = m3 / m2**1.5
            kurt = m4 / m2**2
            jb = n / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
            std = math.sqrt(m2 * n / (n - 1))
        out[name] = InstitutionStats(
            minimum=float(np.min(x)),
            maximum=float(np.max(x)),
            mean=mean,
            std_dev=std,
            skewness=skew,
            kurtosis=kurt,
            q01=float(np.quantile(x, 0.01)),
            jb=jb,
        )
    return SummaryStats(frequency=panel.frequency, stats=out)
