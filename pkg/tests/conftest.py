import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from coalrisk.panel import ReturnPanel


def write_levels_csv(path: Path, panel: ReturnPanel, fmt: str = "%.12f") -> Path:
    """Serialize a levels panel to the CSV format the loader expects."""
    lines = ["date," + ",".join(panel.institutions)]
    for date, row in zip(panel.dates, panel.values):
        cells = ["" if np.isnan(v) else fmt % v for v in row]
        lines.append(date.isoformat() + "," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def weekdays(start: dt.date, count: int) -> tuple[dt.date, ...]:
    days = []
    current = start
    while len(days) < count:
        if current.weekday() < 5:
            days.append(current)
        current += dt.timedelta(days=1)
    return tuple(days)


@pytest.fixture
def rng():
    return np.random.default_rng(20160721)
