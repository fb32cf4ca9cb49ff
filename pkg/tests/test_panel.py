import datetime as dt
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import weekdays
from coalrisk.panel import (
    PanelParseError,
    ReturnPanel,
    load_levels,
    log_returns,
    rolling_windows,
    summary_stats,
    weekly_aggregate,
)

CSV_BASIC = """date,alpha,beta
2020-01-06,100.0,50.0
2020-01-07,101.0,51.0
2020-01-08,102.0,49.5
"""

CSV_TRAILING_EMPTY = """date,alpha,beta
2020-01-06,100.0,50.0
2020-01-07,101.0,51.0
2020-01-08,102.0,
2020-01-09,103.0,
"""


class TestLoadLevels:
    def test_basic_fixture(self):
        panel = load_levels(io.StringIO(CSV_BASIC))
        assert panel.kind == "levels"
        assert len(panel.dates) == 3
        assert panel.institutions == ("alpha", "beta")
        assert panel.values[2, 1] == 49.5

    def test_availability_stops_at_last_value(self):
        panel = load_levels(io.StringIO(CSV_TRAILING_EMPTY))
        first, last = panel.availability["beta"]
        assert first == dt.date(2020, 1, 6)
        assert last == dt.date(2020, 1, 7)
        assert panel.availability["alpha"][1] == dt.date(2020, 1, 9)

    def test_unsorted_dates_rejected(self):
        bad = CSV_BASIC.replace("2020-01-08", "2020-01-01")
        with pytest.raises(PanelParseError, match="not sorted"):
            load_levels(io.StringIO(bad))

    def test_duplicate_date_rejected(self):
        bad = CSV_BASIC.replace("2020-01-08", "2020-01-07")
        with pytest.raises(PanelParseError, match="duplicate date"):
            load_levels(io.StringIO(bad))

    def test_non_numeric_cell_names_location(self):
        bad = CSV_BASIC.replace("49.5", "oops")
        with pytest.raises(PanelParseError, match=r"row 4.*beta.*oops"):
            load_levels(io.StringIO(bad))

    def test_duplicate_institution_rejected(self):
        bad = CSV_BASIC.replace("alpha,beta", "alpha,alpha")
        with pytest.raises(PanelParseError, match="duplicate institution"):
            load_levels(io.StringIO(bad))

    def test_malformed_date_rejected(self):
        bad = CSV_BASIC.replace("2020-01-07", "07/01/2020")
        with pytest.raises(PanelParseError, match="malformed date"):
            load_levels(io.StringIO(bad))

    def test_interior_gap_rejected(self):
        bad = "date,a\n2020-01-06,1.0\n2020-01-07,\n2020-01-08,1.0\n"
        with pytest.raises(PanelParseError, match="interior missing"):
            load_levels(io.StringIO(bad))


class TestLogReturns:
    def test_flat_levels_give_zero(self):
        panel = load_levels(io.StringIO("date,a\n2020-01-06,100\n2020-01-07,100\n"))
        out = log_returns(panel)
        assert out.kind == "returns"
        assert out.values[0, 0] == 0.0
        assert len(out.dates) == 1

    def test_ten_percent_move(self):
        panel = load_levels(io.StringIO("date,a\n2020-01-06,100\n2020-01-07,110\n"))
        out = log_returns(panel)
        # direct evaluation: 100 * ln(1.1)
        assert out.values[0, 0] == pytest.approx(100.0 * math.log(1.1), abs=1e-12)
        assert out.values[0, 0] == pytest.approx(9.531017980432486, abs=1e-12)

    def test_nonpositive_level_raises_with_location(self):
        panel_csv = "date,a,b\n2020-01-06,100,1\n2020-01-07,0.0,1\n"
        panel = load_levels(io.StringIO(panel_csv))
        with pytest.raises(ValueError, match="'a' on 2020-01-07"):
            log_returns(panel)

    def test_staggered_availability(self):
        csv = (
            "date,a,b\n"
            "2020-01-06,100,\n"
            "2020-01-07,101,50\n"
            "2020-01-08,102,51\n"
        )
        out = log_returns(load_levels(io.StringIO(csv)))
        assert len(out.dates) == 2
        assert math.isnan(out.values[0, 1])
        assert out.availability["b"] == (dt.date(2020, 1, 8), dt.date(2020, 1, 8))


class TestWeeklyAggregate:
    def test_week_of_ones_sums_to_five(self):
        dates = weekdays(dt.date(2020, 1, 6), 5)  # one ISO week
        panel = ReturnPanel(
            dates=dates,
            institutions=("a",),
            values=np.ones((5, 1)),
            kind="returns",
        )
        weekly = weekly_aggregate(panel)
        assert weekly.frequency == "weekly"
        assert weekly.values.shape == (1, 1)
        assert weekly.values[0, 0] == 5.0
        assert weekly.dates[0] == dates[-1]

    def test_single_day_week(self):
        panel = ReturnPanel(
            dates=(dt.date(2020, 1, 8),),
            institutions=("a",),
            values=np.array([[2.5]]),
            kind="returns",
        )
        weekly = weekly_aggregate(panel)
        assert weekly.values[0, 0] == 2.5

    def test_holiday_gap_fixture(self):
        # week 1: Mon+Tue, week 2: Thu only (hand-computed sums 3.0 and 7.0)
        dates = (
            dt.date(2020, 1, 6),
            dt.date(2020, 1, 7),
            dt.date(2020, 1, 16),
        )
        panel = ReturnPanel(
            dates=dates,
            institutions=("a",),
            values=np.array([[1.0], [2.0], [7.0]]),
            kind="returns",
        )
        weekly = weekly_aggregate(panel)
        assert weekly.values.shape == (2, 1)
        assert weekly.values[0, 0] == 3.0
        assert weekly.values[1, 0] == 7.0
        assert weekly.dates == (dt.date(2020, 1, 7), dt.date(2020, 1, 16))

    def test_levels_keep_last_of_week(self):
        dates = weekdays(dt.date(2020, 1, 6), 7)
        levels = np.arange(1.0, 8.0).reshape(-1, 1)
        panel = ReturnPanel(dates=dates, institutions=("a",), values=levels)
        weekly = weekly_aggregate(panel)
        assert list(weekly.values[:, 0]) == [5.0, 7.0]

    def test_requires_daily(self):
        panel = ReturnPanel(
            dates=(dt.date(2020, 1, 6),),
            institutions=("a",),
            values=np.array([[1.0]]),
            kind="returns",
            frequency="weekly",
        )
        with pytest.raises(ValueError, match="daily"):
            weekly_aggregate(panel)

    def test_additivity_matches_levels_route(self, rng):
        # weekly sum of daily log returns == log return of weekly last
        # levels wherever both routes are defined; the returns route has
        # exactly one extra leading cell per institution (its base week)
        dates = weekdays(dt.date(2020, 2, 5), 47)  # starts mid-week
        levels = np.exp(rng.normal(0, 0.02, size=(47, 3)).cumsum(axis=0)) * 100
        panel = ReturnPanel(dates=dates, institutions=("a", "b", "c"), values=levels)
        via_returns = weekly_aggregate(log_returns(panel))
        via_levels = log_returns(weekly_aggregate(panel))
        assert via_returns.dates[1:] == via_levels.dates
        np.testing.assert_allclose(
            via_returns.values[1:], via_levels.values, rtol=0, atol=1e-12
        )


class TestRollingWindows:
    def _panel(self, n, p=2):
        dates = weekdays(dt.date(2020, 1, 6), n)
        values = np.arange(n * p, dtype=float).reshape(n, p)
        return ReturnPanel(
            dates=dates, institutions=tuple(f"i{j}" for j in range(p)), values=values,
            kind="returns",
        )

    def test_count(self):
        windows = rolling_windows(self._panel(30), 26)
        assert len(windows) == 5

    def test_exact_length_single_window(self):
        windows = rolling_windows(self._panel(26), 26)
        assert len(windows) == 1

    def test_each_window_shape_and_dates(self):
        for w in rolling_windows(self._panel(30), 26):
            assert w.n_dates == 26
            assert all(a < b for a, b in zip(w.dates, w.dates[1:]))

    def test_exiting_institution_dropped(self):
        n = 30
        dates = weekdays(dt.date(2020, 1, 6), n)
        values = np.ones((n, 2))
        values[20:, 1] = np.nan  # second institution exits at row 19
        panel = ReturnPanel(
            dates=dates, institutions=("stay", "exit"), values=values, kind="returns"
        )
        windows = rolling_windows(panel, 10)
        for w in windows:
            if w.dates[-1] <= dates[19]:
                assert w.institutions == ("stay", "exit")
            else:
                assert w.institutions == ("stay",)

    def test_window_longer_than_panel_rejected(self):
        with pytest.raises(ValueError, match="fewer than window"):
            rolling_windows(self._panel(10), 26)

    def test_tiny_window_rejected(self):
        with pytest.raises(ValueError, match=">= 2"):
            rolling_windows(self._panel(10), 1)


def _returns_panel(values: np.ndarray) -> ReturnPanel:
    values = np.asarray(values, dtype=float)
    dates = weekdays(dt.date(2020, 1, 6), values.shape[0])
    names = tuple(f"i{j}" for j in range(values.shape[1]))
    return ReturnPanel(dates=dates, institutions=names, values=values, kind="returns")


class TestSummaryStats:
    def test_alternating_series(self):
        panel = _returns_panel(np.array([[-1.0], [1.0], [-1.0], [1.0]]))
        s = summary_stats(panel).stats["i0"]
        assert s.mean == 0.0
        assert s.skewness == 0.0
        assert s.minimum == -1.0 and s.maximum == 1.0

    def test_normal_sample_kurtosis(self, rng):
        x = rng.standard_normal((10**5, 1))
        s = summary_stats(_returns_panel(x)).stats["i0"]
        assert s.kurtosis == pytest.approx(3.0, abs=0.1)
        assert s.jb < 10.0

    def test_hand_fixture_against_naive_oracle(self):
        x = [1.2, -0.7, 3.1, 0.4, -2.2, 0.9, 1.7, -0.5]
        n = len(x)
        mean = sum(x) / n
        m2 = sum((v - mean) ** 2 for v in x) / n
        m3 = sum((v - mean) ** 3 for v in x) / n
        m4 = sum((v - mean) ** 4 for v in x) / n
        skew = m3 / m2**1.5
        kurt = m4 / m2**2
        jb = n / 6 * (skew**2 + (kurt - 3) ** 2 / 4)
        std = math.sqrt(m2 * n / (n - 1))
        # linear-interpolation 1% quantile between the two smallest values
        pos = 0.01 * (n - 1)
        xs = sorted(x)
        q01 = xs[0] + (xs[1] - xs[0]) * pos

        s = summary_stats(_returns_panel(np.array(x).reshape(-1, 1))).stats["i0"]
        assert s.mean == pytest.approx(mean, abs=1e-14)
        assert s.std_dev == pytest.approx(std, abs=1e-14)
        assert s.skewness == pytest.approx(skew, abs=1e-13)
        assert s.kurtosis == pytest.approx(kurt, abs=1e-13)
        assert s.jb == pytest.approx(jb, abs=1e-12)
        assert s.q01 == pytest.approx(q01, abs=1e-13)

    def test_constant_series_flagged(self):
        panel = _returns_panel(np.full((6, 1), 2.5))
        s = summary_stats(panel).stats["i0"]
        assert s.std_dev == 0.0
        assert math.isnan(s.skewness) and math.isnan(s.kurtosis) and math.isnan(s.jb)

    def test_too_few_observations(self):
        with pytest.raises(ValueError, match="< 4"):
            summary_stats(_returns_panel(np.zeros((3, 1))))

    def test_reports_frequency(self):
        panel = _returns_panel(np.random.default_rng(0).normal(size=(10, 1)))
        assert summary_stats(panel).frequency == "daily"

    @settings(deadline=None, max_examples=25)
    @given(st.floats(-50, 50))
    def test_location_shift(self, shift):
        rng = np.random.default_rng(99)
        x = rng.normal(size=(40, 1))
        base = summary_stats(_returns_panel(x)).stats["i0"]
        moved = summary_stats(_returns_panel(x + shift)).stats["i0"]
        assert moved.mean == pytest.approx(base.mean + shift, abs=1e-10)
        assert moved.minimum == pytest.approx(base.minimum + shift, abs=1e-10)
        assert moved.maximum == pytest.approx(base.maximum + shift, abs=1e-10)
        assert moved.q01 == pytest.approx(base.q01 + shift, abs=1e-10)
        assert moved.std_dev == pytest.approx(base.std_dev, abs=1e-10)
        assert moved.skewness == pytest.approx(base.skewness, abs=1e-10)
        assert moved.kurtosis == pytest.approx(base.kurtosis, abs=1e-10)
        assert moved.jb == pytest.approx(base.jb, abs=1e-8)
