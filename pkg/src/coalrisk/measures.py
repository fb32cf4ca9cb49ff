"""Tail risk measures: VaR/ES closed forms, conditional variants, oracles.

Sign convention
---------------
Everything internal lives on quantile/threshold scale (lower tail): the
tau-quantile threshold ``mu + sd * Phi^{-1}(tau)`` and conditional tail
means are typically negative numbers. The classical "negative of the
quantile" VaR is exposed separately as `gaussian_var`. The discrete-sample
`empirical_es` and `spectral_measure` keep their customary negated
(loss-positive) convention, discount factor included.

Conditional measures
--------------------
For a safe institution X_i and a coalition sum X_S, jointly Gaussian with
correlation rho:

* the conditional quantile gamma ("SCoVaR" level) solves
  F(gamma, nu) / tau2 = tau1, where nu is the tau2-quantile threshold of
  X_S and F the joint lower CDF — solved by bracketed bisection on the
  standardized scale (the root is unique: F is continuous and strictly
  increasing in its first argument);
* the conditional tail mean ("SCoES" level) is
  E[X_i | X_i <= gamma, X_S <= nu], evaluated through the truncated
  bivariate-normal mean, normalized by the joint probability.

Under independence (rho == 0) both collapse exactly to the marginal
quantile threshold and marginal Gaussian ES; the solver special-cases this
so the collapse identities hold to machine precision.

Empirical estimators mirror the closed forms on equiprobable samples; an
optional switch conditions the coalition sum on its tail-mean (ES) level
instead of the tau2-quantile threshold, the alternative reading of the
conditional-mean definition. Conventions: the tau-quantile of an n-sample
is the ceil(tau * n)-th smallest value; conditional quantiles apply the
same rule inside the conditioning event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .covariance import GaussianModel
from .gauss import (
    DegenerateRegionError,
    _bvn_lower,
    _truncated_mean,
    std_normal_pdf,
)

__all__ = [
    "SolverError",
    "RiskConfig",
    "CoalitionPairModel",
    "RiskMeasureResult",
    "gaussian_quantile_threshold",
    "gaussian_var",
    "gaussian_es",
    "empirical_es",
    "spectral_measure",
    "coalition_pair_model",
    "scovar",
    "scoes",
    "solve_risk_measures",
    "empirical_scovar",
    "empirical_scoes",
    "delta_condition_bound",
]

_RESIDUAL_TOL = 1e-10
_WIDTH_TOL = 1e-13
_MAX_DOUBLINGS = 200
_MAX_BISECTIONS = 400


class SolverError(RuntimeError):
    """Root solver failed to bracket or converge."""


def _check_tau(name: str, tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {tau}")
    return tau


@dataclass(frozen=True)
class RiskConfig:
    """Confidence levels, discount factor and safe-institution weights.

    weights maps safe-institution names to nonnegative weights that must sum
    to the number of safe institutions (checked where the partition is
    known); None means equal weights of 1. delta scales the discrete-sample
    measures (empirical_es, spectral_measure) only: the Gaussian closed
    forms are their delta = 1 instance.
    """

    tau1: float = 0.05
    tau2: float = 0.05
    delta: float = 1.0
    weights: Mapping[str, float] | None = None

    def __post_init__(self):
        _check_tau("tau1", self.tau1)
        _check_tau("tau2", self.tau2)
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.weights is not None:
            bad = {k: v for k, v in self.weights.items() if v < 0}
            if bad:
                raise ValueError(f"weights must be nonnegative, got {bad}")


@dataclass(frozen=True)
class CoalitionPairModel:
    """Bivariate reduction (X_i, sum over coalition) of a Gaussian model."""

    mu_i: float
    mu_s: float
    var_i: float
    var_s: float
    cov_is: float

    def __post_init__(self):
        if self.var_i <= 0 or self.var_s <= 0:
            raise DegenerateRegionError(
                f"variances must be positive, got var_i={self.var_i}, "
                f"var_s={self.var_s}"
            )
        raw = self.cov_is / math.sqrt(self.var_i * self.var_s)
        if abs(raw) > 1.0 + 1e-9:
            raise ValueError(f"implied correlation {raw} outside [-1, 1]")

    @property
    def rho(self) -> float:
        raw = self.cov_is / math.sqrt(self.var_i * self.var_s)
        return min(1.0, max(-1.0, raw))


@dataclass(frozen=True)
class RiskMeasureResult:
    """Bundle of the four conditional-measure quantities for one (i, S)."""

    nu_hat: float
    psi_hat: float
    gamma_hat: float
    sigma_hat_es: float
    root_residual: float

    def __post_init__(self):
        if not all(
            math.isfinite(v)
            for v in (self.nu_hat, self.psi_hat, self.gamma_hat, self.sigma_hat_es)
        ):
            raise ValueError("non-finite risk measure")
        slack = 1e-9 * max(1.0, abs(self.gamma_hat))
        if self.sigma_hat_es > self.gamma_hat + slack:
            raise ValueError(
                f"conditional tail mean {self.sigma_hat_es} exceeds its "
                f"threshold {self.gamma_hat}"
            )


def gaussian_quantile_threshold(mu: float, var: float, tau: float) -> float:
    """tau-quantile of N(mu, var): mu + sqrt(var) * Phi^{-1}(tau)."""
    _check_tau("tau", tau)
    if var <= 0:
        raise ValueError(f"var must be positive, got {var}")
    return float(mu + math.sqrt(var) * ndtri(tau))


def gaussian_var(mu: float, var: float, tau: float) -> float:
    """Value-at-Risk in the loss-positive convention: minus the quantile."""
    return -gaussian_quantile_threshold(mu, var, tau)


def gaussian_es(mu: float, var: float, tau: float) -> float:
    """Lower-tail conditional mean E[X | X <= tau-quantile] of N(mu, var).

    Equals mu - sqrt(var) * phi(z) / tau with z = Phi^{-1}(tau); always
    below the quantile threshold at the same tau.
    """
    _check_tau("tau", tau)
    if var <= 0:
        raise ValueError(f"var must be positive, got {var}")
    z = ndtri(tau)
    return float(mu - math.sqrt(var) * std_normal_pdf(z) / tau)


def empirical_es(values: Sequence[float], tau_count: int, delta: float = 1.0) -> float:
    """Discounted average of the worst tau_count outcomes, negated.

    -(delta / tau_count) * sum of the tau_count smallest values; positive
    when the lower tail is negative.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError("values must be a nonempty finite 1-d sample")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not 1 <= tau_count <= x.size:
        raise ValueError(
            f"tau_count must lie in [1, {x.size}], got {tau_count}"
        )
    worst = np.sort(x, kind="stable")[:tau_count]
    return float(-delta / tau_count * worst.sum())


def spectral_measure(
    phi: Sequence[float], values: Sequence[float], delta: float = 1.0
) -> float:
    """Spectral risk functional -delta * sum_j phi_j * x_(j).

    phi must be nonnegative (N1), sum to 1 (N2) and be nonincreasing (M);
    x_(j) is the increasing rearrangement of the sample. Violations raise
    ValueError naming the failed axiom.
    """
    w = np.asarray(phi, dtype=float)
    x = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.shape != x.shape:
        raise ValueError("phi and values must be 1-d with equal length")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if np.any(w < 0):
        raise ValueError("axiom N1 violated: negative weight")
    if abs(float(w.sum()) - 1.0) > 1e-12:
        raise ValueError(f"axiom N2 violated: weights sum to {w.sum()}")
    if np.any(np.diff(w) > 0):
        raise ValueError("axiom M violated: weights must be nonincreasing")
    ordered = np.sort(x, kind="stable")
    return float(-delta * (w @ ordered))


def coalition_pair_model(
    model: GaussianModel, i: str, coalition: Sequence[str]
) -> CoalitionPairModel:
    """Reduce (X_i, sum_{j in coalition} X_j) to its bivariate Gaussian law.

    mu_s, var_s and cov_is are elementwise sums over the coalition block of
    the model's moments; i must not belong to the coalition, which must be
    nonempty.
    """
    members = list(coalition)
    if not members:
        raise ValueError("coalition must be nonempty (empty case is the caller's)")
    if i in members:
        raise ValueError(f"institution {i!r} cannot belong to its own coalition")
    ii = model.index(i)
    idx = [model.index(name) for name in members]
    mu_s = float(model.mu[idx].sum())
    var_s = float(model.sigma[np.ix_(idx, idx)].sum())
    cov_is = float(model.sigma[ii, idx].sum())
    return CoalitionPairModel(
        mu_i=float(model.mu[ii]),
        mu_s=mu_s,
        var_i=float(model.sigma[ii, ii]),
        var_s=var_s,
        cov_is=cov_is,
    )


def _scovar_std(rho, tau1: float, tau2: float):
    """Standardized conditional-quantile roots for an array of correlations.

    Returns (h, residual) with h solving
        bvn_lower(h, z_tau2, rho) / tau2 = tau1
    by bracketed bisection: start at [-10, 10], double until the residual
    changes sign, stop once |residual| <= 1e-10 or the bracket is narrower
    than 1e-13. rho == 0 short-circuits to the exact marginal quantile.
    Elements converge independently, so scalar and batched solves agree
    bit-for-bit.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    zk = float(ndtri(tau2))
    target = tau1 * tau2
    h = np.empty_like(rho)
    res = np.empty_like(rho)

    exact = rho == 0.0
    if exact.any():
        h0 = float(ndtri(tau1))
        h[exact] = h0
        res[exact] = _bvn_lower(h0, zk, rho[exact]) / tau2 - tau1

    active_idx = np.flatnonzero(~exact)
    if active_idx.size:
        r = rho[active_idx]
        lo = np.full(r.shape, -10.0)
        hi = np.full(r.shape, 10.0)

        def residual(y):
            return _bvn_lower(y, zk, r) / tau2 - tau1

        for _ in range(_MAX_DOUBLINGS):
            res_lo = residual(lo)
            res_hi = residual(hi)
            bad_lo = res_lo > 0.0
            bad_hi = res_hi < 0.0
            if not bad_lo.any() and not bad_hi.any():
                break
            lo[bad_lo] *= 2.0
            hi[bad_hi] *= 2.0
        else:
            raise SolverError(
                "failed to bracket the conditional quantile after "
                f"{_MAX_DOUBLINGS} doublings"
            )

        mid = 0.5 * (lo + hi)
        rmid = residual(mid)
        done = (np.abs(rmid) <= _RESIDUAL_TOL) | ((hi - lo) <= 2.0 * _WIDTH_TOL)
        for _ in range(_MAX_BISECTIONS):
            if done.all():
                break
            act = ~done
            low = rmid[act] < 0.0
            lo_act = lo[act]
            hi_act = hi[act]
            mid_act = mid[act]
            lo_act[low] = mid_act[low]
            hi_act[~low] = mid_act[~low]
            lo[act] = lo_act
            hi[act] = hi_act
            new_mid = 0.5 * (lo_act + hi_act)
            mid[act] = new_mid
            sub = _bvn_lower(new_mid, zk, r[act]) / tau2 - tau1
            rmid[act] = sub
            done_act = (np.abs(sub) <= _RESIDUAL_TOL) | (
                (hi_act - lo_act) <= 2.0 * _WIDTH_TOL
            )
            full = done.copy()
            full[act] = done_act
            done = full
        if not done.all():
            raise SolverError(
                f"bisection failed to converge within {_MAX_BISECTIONS} steps"
            )
        h[active_idx] = mid
        res[active_idx] = rmid
    return h, res


def scovar(pair: CoalitionPairModel, tau1: float, tau2: float) -> float:
    """Conditional tau1-quantile of X_i given the coalition distress event.

    Root of F(y, nu)/tau2 = tau1 where nu is the coalition sum's
    tau2-quantile threshold; residual at the returned point is at most
    1e-10. Independence (rho == 0) returns the marginal quantile threshold
    exactly; an empty coalition is the caller's collapse case (marginal
    quantile, see the game module).
    """
    _check_tau("tau1", tau1)
    _check_tau("tau2", tau2)
    h, _ = _scovar_std(pair.rho, tau1, tau2)
    return float(pair.mu_i + math.sqrt(pair.var_i) * h[0])


def scoes(pair: CoalitionPairModel, tau1: float, tau2: float) -> float:
    """Conditional tail mean E[X_i | X_i <= scovar, coalition sum <= nu].

    Evaluated as mu_i + sd_i * E[Z1 | Z1 <= h, Z2 <= z_tau2] on the
    standardized pair (truncated bivariate-normal mean, normalized by the
    joint probability). Always at most the scovar level.
    """
    _check_tau("tau1", tau1)
    _check_tau("tau2", tau2)
    h, _ = _scovar_std(pair.rho, tau1, tau2)
    zk = float(ndtri(tau2))
    rho_arr = np.atleast_1d(np.asarray(pair.rho, dtype=float))
    p = _bvn_lower(h, zk, rho_arr)
    if np.any(p <= 0.0):
        raise DegenerateRegionError("joint distress region has zero probability")
    m = _truncated_mean(h, np.full_like(h, zk), rho_arr, p)
    return float(pair.mu_i + math.sqrt(pair.var_i) * m[0])


def solve_risk_measures(
    pair: CoalitionPairModel, tau1: float, tau2: float
) -> RiskMeasureResult:
    """All conditional-measure quantities for one pair reduction."""
    _check_tau("tau1", tau1)
    _check_tau("tau2", tau2)
    sd_i = math.sqrt(pair.var_i)
    h, res = _scovar_std(pair.rho, tau1, tau2)
    zk = float(ndtri(tau2))
    rho_arr = np.atleast_1d(np.asarray(pair.rho, dtype=float))
    p = _bvn_lower(h, zk, rho_arr)
    if np.any(p <= 0.0):
        raise DegenerateRegionError("joint distress region has zero probability")
    m = _truncated_mean(h, np.full_like(h, zk), rho_arr, p)
    return RiskMeasureResult(
        nu_hat=gaussian_quantile_threshold(pair.mu_s, pair.var_s, tau2),
        psi_hat=gaussian_es(pair.mu_s, pair.var_s, tau2),
        gamma_hat=float(pair.mu_i + sd_i * h[0]),
        sigma_hat_es=float(pair.mu_i + sd_i * m[0]),
        root_residual=float(res[0]),
    )


def _tail_count(tau: float, n: int) -> int:
    return max(1, math.ceil(tau * n))


def _kth_smallest(x: np.ndarray, k: int) -> float:
    return float(np.partition(x, k - 1)[k - 1])


def _coalition_sums(sample: np.ndarray, members: Sequence[int]) -> np.ndarray:
    if len(members) == 0:
        # no institution under distress: the sum is identically zero and the
        # conditioning event has probability one (marginal collapse)
        return np.zeros(sample.shape[0])
    return sample[:, list(members)].sum(axis=1)


def _validate_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("sample must be a nonempty (draws x institutions) matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def empirical_scovar(
    sample, i: int, members: Sequence[int], tau1: float, tau2: float
) -> float:
    """Empirical conditional quantile on an equiprobable joint sample.

    Conditions on the coalition sum lying at or below its empirical
    tau2-quantile, then returns the tau1-quantile of X_i within that event
    (smallest realized value whose conditional frequency reaches tau1).
    Samples of at least ~1/(tau1*tau2) draws are recommended so the doubly
    conditional tail is populated.
    """
    _check_tau("tau1", tau1)
    _check_tau("tau2", tau2)
    x = _validate_sample(sample)
    if i in members:
        raise ValueError(f"column {i} cannot belong to its own coalition")
    sums = _coalition_sums(x, members)
    nu = _kth_smallest(sums, _tail_count(tau2, sums.size))
    cond = x[sums <= nu, i]
    if cond.size == 0:
        raise DegenerateRegionError("empty conditioning set")
    return _kth_smallest(cond, _tail_count(tau1, cond.size))


def empirical_scoes(
    sample,
    i: int,
    members: Sequence[int],
    tau1: float,
    tau2: float,
    *,
    es_threshold: bool = False,
) -> float:
    """Empirical conditional tail mean of X_i under joint distress.

    Default conditioning uses the coalition sum's tau2-quantile threshold
    (matching the closed form); es_threshold=True conditions on the sum's
    empirical tail-mean (ES) level instead — the alternative reading of the
    conditional-mean definition.
    """
    gamma = empirical_scovar(sample, i, members, tau1, tau2)
    x = _validate_sample(sample)
    sums = _coalition_sums(x, members)
    k2 = _tail_count(tau2, sums.size)
    if es_threshold:
        threshold = float(np.partition(sums, k2 - 1)[:k2].mean())
    else:
        threshold = _kth_smallest(sums, k2)
    keep = (x[:, i] <= gamma) & (sums <= threshold)
    if not keep.any():
        raise DegenerateRegionError("empty conditioning set for the tail mean")
    return float(x[keep, i].mean())


def delta_condition_bound(member_sample, tau2: float) -> float:
    """Diagnostic: smallest discount factor making ES-level conditioning hold.

    For each observed coalition draw with at least one negative member
    return, the conditioning event "sum <= ES-level of the sum" holds iff
    delta >= -tau2 * (sum of all member returns) / (sum of the negative
    ones); the maximum of these bounds over the draws is returned. Draws
    with no negative member cannot satisfy the event through delta and
    yield +inf.
    """
    _check_tau("tau2", tau2)
    x = _validate_sample(member_sample)
    neg = np.where(x < 0.0, x, 0.0)
    neg_sum = neg.sum(axis=1)
    total = x.sum(axis=1)
    bounds = np.where(neg_sum < 0.0, -tau2 * total / np.where(neg_sum < 0, neg_sum, -1.0), math.inf)
    return float(bounds.max())
