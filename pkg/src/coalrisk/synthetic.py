"""Synthetic panel generators for experiments and validation fixtures."""

from __future__ import annotations

import datetime as dt
from typing import Sequence

import numpy as np

from .panel import ReturnPanel

__all__ = [
    "business_days",
    "gaussian_levels_panel",
    "two_regime_levels_panel",
    "equicorrelated_sigma",
    "block_diagonal_sigma",
]


def business_days(start: dt.date, count: int) -> tuple[dt.date, ...]:
    """count consecutive Monday-Friday dates from start."""
    days = []
    current = start
    while len(days) < count:
        if current.weekday() < 5:
            days.append(current)
        current += dt.timedelta(days=1)
    return tuple(days)


def equicorrelated_sigma(p: int, corr: float, sd: Sequence[float] | float = 1.0) -> np.ndarray:
    """Covariance with common pairwise correlation and given volatilities."""
    sd = np.broadcast_to(np.asarray(sd, dtype=float), (p,))
    c = np.full((p, p), corr)
    np.fill_diagonal(c, 1.0)
    return c * np.outer(sd, sd)


def block_diagonal_sigma(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal covariance; cross-block entries exactly zero."""
    sizes = [b.shape[0] for b in blocks]
    p = sum(sizes)
    out = np.zeros((p, p))
    at = 0
    for b in blocks:
        k = b.shape[0]
        out[at : at + k, at : at + k] = b
        at += k
    return out


def _returns_to_levels(returns: np.ndarray, base: float) -> np.ndarray:
    return base * np.exp(np.cumsum(returns, axis=0) / 100.0)


def gaussian_levels_panel(
    rng: np.random.Generator,
    labels: Sequence[str],
    mu: np.ndarray,
    sigma: np.ndarray,
    n_days: int,
    *,
    start: dt.date = dt.date(2009, 1, 5),
    base: float = 100.0,
) -> ReturnPanel:
    """Daily levels panel whose x100 log returns are iid N(mu, sigma).

    The first row is the common base level; n_days rows follow.
    """
    p = len(labels)
    draws = rng.multivariate_normal(np.asarray(mu, float), np.asarray(sigma, float), size=n_days)
    levels = np.vstack([np.full(p, base), _returns_to_levels(draws, base)])
    return ReturnPanel(
        dates=business_days(start, n_days + 1),
        institutions=tuple(labels),
        values=levels,
        kind="levels",
    )


def two_regime_levels_panel(
    rng: np.random.Generator,
    labels: Sequence[str],
    mu: np.ndarray,
    sigma_pre: np.ndarray,
    sigma_post: np.ndarray,
    n_pre_days: int,
    n_post_days: int,
    *,
    start: dt.date = dt.date(2009, 1, 5),
    base: float = 100.0,
) -> tuple[ReturnPanel, dt.date]:
    """Daily levels panel with a covariance break after n_pre_days returns.

    Returns the panel and the date of the last pre-break observation.
    """
    p = len(labels)
    mu = np.asarray(mu, dtype=float)
    pre = rng.multivariate_normal(mu, np.asarray(sigma_pre, float), size=n_pre_days)
    post = rng.multivariate_normal(mu, np.asarray(sigma_post, float), size=n_post_days)
    returns = np.vstack([pre, post])
    levels = np.vstack([np.full(p, base), _returns_to_levels(returns, base)])
    dates = business_days(start, n_pre_days + n_post_days + 1)
    panel = ReturnPanel(
        dates=dates,
        institutions=tuple(labels),
        values=levels,
        kind="levels",
    )
    return panel, dates[n_pre_days]
