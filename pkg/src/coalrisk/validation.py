"""Monte Carlo oracle suite for the closed forms, plus game property checks.

The oracle never touches the closed-form path it validates: bivariate draws
come from an explicit two-variable Cholesky construction, tail thresholds
and tail means are plain order statistics of those draws, and standard
errors are estimated from the sample itself (order-statistic spacing for
quantiles, batch means for conditional tail means). A closed form passes a
check when it falls within ``se_mult`` standard errors of its estimate.

The game suite checks the attribution algebra on random cost tables:
Shapley efficiency, the d=2 Shapley/Banzhaf coincidence, zero payoff for
dummy players, and agreement with the d!-permutation average definition on
small games.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Sequence

import numpy as np

from . import game, measures

__all__ = [
    "CheckResult",
    "ValidationReport",
    "draw_pair_sample",
    "mc_quantile",
    "mc_tail_mean",
    "random_pair_spec",
    "run_oracle_suite",
    "run_game_suite",
    "run_validation",
    "shapley_by_permutations",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    discrepancy: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name:<28} "
            f"|err|={self.discrepancy:.6e} tol={self.tolerance:.6e} {self.detail}"
        )


@dataclass(frozen=True)
class ValidationReport:
    seed: int
    n_draws: int
    n_specs: int
    se_mult: float
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [
            f"validation report: seed={self.seed} draws={self.n_draws} "
            f"specs={self.n_specs} se_mult={self.se_mult:g}"
        ]
        lines.extend(c.line() for c in self.checks)
        n_pass = sum(c.passed for c in self.checks)
        lines.append(f"summary: {n_pass}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


def random_pair_spec(
    rng: np.random.Generator, rho_max: float = 0.95
) -> measures.CoalitionPairModel:
    """Random bivariate reduction with |rho| <= rho_max."""
    sd_i = rng.uniform(0.5, 2.5)
    sd_s = rng.uniform(0.5, 2.5)
    rho = rng.uniform(-rho_max, rho_max)
    return measures.CoalitionPairModel(
        mu_i=rng.uniform(-2.0, 2.0),
        mu_s=rng.uniform(-2.0, 2.0),
        var_i=sd_i**2,
        var_s=sd_s**2,
        cov_is=rho * sd_i * sd_s,
    )


def draw_pair_sample(
    rng: np.random.Generator, pair: measures.CoalitionPairModel, n: int
) -> np.ndarray:
    """n joint draws of (X_i, coalition sum), column-stacked."""
    z = rng.standard_normal((n, 2))
    sd_i = math.sqrt(pair.var_i)
    sd_s = math.sqrt(pair.var_s)
    rho = pair.rho
    x_i = pair.mu_i + sd_i * z[:, 0]
    x_s = pair.mu_s + sd_s * (rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1])
    return np.column_stack([x_i, x_s])


def mc_quantile(x: np.ndarray, tau: float) -> tuple[float, float]:
    """Empirical tau-quantile and its order-statistic-spacing standard error."""
    n = x.size
    k = max(1, math.ceil(tau * n))
    xs = np.sort(x)
    est = float(xs[k - 1])
    width = max(1, math.ceil(math.sqrt(n * tau * (1.0 - tau))))
    hi = xs[min(k - 1 + width, n - 1)]
    lo = xs[max(k - 1 - width, 0)]
    return est, max(float(hi - lo) / 2.0, 1e-300)


def mc_tail_mean(x: np.ndarray, tau: float) -> tuple[float, float]:
    """Mean of the worst ceil(tau*n) outcomes and its standard error.

    The estimator's asymptotic variance carries both the within-tail
    variance and a quantile-estimation term:
    [var(X | tail) + (1 - tau) * (q - mean)^2] / k.
    """
    n = x.size
    k = max(1, math.ceil(tau * n))
    if k < 2:
        return float(np.min(x)), 1.0
    part = np.partition(x, k - 1)
    tail = part[:k]
    q = float(part[k - 1])
    mean = float(tail.mean())
    var = float(tail.var(ddof=1)) + (1.0 - tau) * (q - mean) ** 2
    return mean, math.sqrt(var / k)


def _batch_se(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / math.sqrt(v.size))


def run_oracle_suite(
    seed: int,
    *,
    n_specs: int = 20,
    n_draws: int = 10**6,
    se_mult: float = 4.0,
    rho_max: float = 0.95,
    tau1: float = 0.05,
    tau2: float = 0.05,
    n_batches: int = 20,
    scovar_fn: Callable[..., float] | None = None,
    scoes_fn: Callable[..., float] | None = None,
) -> list[CheckResult]:
    """Closed-form VaR/ES/SCoVaR/SCoES vs Monte Carlo on random specs.

    scovar_fn / scoes_fn are injection points for fault-sensitivity tests;
    they default to the production closed forms.
    """
    scovar_fn = scovar_fn or measures.scovar
    scoes_fn = scoes_fn or measures.scoes
    root = np.random.SeedSequence(seed)
    checks: list[CheckResult] = []
    for idx, child in enumerate(root.spawn(n_specs)):
        rng = np.random.default_rng(child)
        pair = random_pair_spec(rng, rho_max=rho_max)
        sample = draw_pair_sample(rng, pair, n_draws)
        x_i = sample[:, 0]
        tag = f"spec{idx:02d}"

        closed_q = measures.gaussian_quantile_threshold(pair.mu_i, pair.var_i, tau1)
        est_q, se_q = mc_quantile(x_i, tau1)
        checks.append(_se_check(f"{tag} var", closed_q, est_q, se_q, se_mult))

        closed_es = measures.gaussian_es(pair.mu_i, pair.var_i, tau1)
        est_es, se_es = mc_tail_mean(x_i, tau1)
        checks.append(_se_check(f"{tag} es", closed_es, est_es, se_es, se_mult))

        closed_cov = scovar_fn(pair, tau1, tau2)
        est_cov = measures.empirical_scovar(sample, 0, [1], tau1, tau2)
        sums = sample[:, 1]
        nu = np.partition(sums, max(1, math.ceil(tau2 * n_draws)) - 1)[
            max(1, math.ceil(tau2 * n_draws)) - 1
        ]
        cond = x_i[sums <= nu]
        _, se_cov = mc_quantile(cond, tau1)
        checks.append(_se_check(f"{tag} scovar", closed_cov, est_cov, se_cov, se_mult))

        closed_ces = scoes_fn(pair, tau1, tau2)
        est_ces = measures.empirical_scoes(sample, 0, [1], tau1, tau2)
        batch = []
        bounds = np.linspace(0, n_draws, n_batches + 1).astype(int)
        for b0, b1 in zip(bounds[:-1], bounds[1:]):
            batch.append(measures.empirical_scoes(sample[b0:b1], 0, [1], tau1, tau2))
        se_ces = _batch_se(batch)
        checks.append(_se_check(f"{tag} scoes", closed_ces, est_ces, se_ces, se_mult))
    return checks


def _se_check(
    name: str, closed: float, estimate: float, se: float, se_mult: float
) -> CheckResult:
    err = abs(closed - estimate)
    tol = se_mult * se
    return CheckResult(
        name=name,
        discrepancy=err,
        tolerance=tol,
        passed=err <= tol,
        detail=f"closed={closed:.10g} mc={estimate:.10g} se={se:.4g}",
    )


def shapley_by_permutations(costs: np.ndarray, d: int) -> np.ndarray:
    """Average marginal contribution over all d! player orderings.

    Independent brute-force definition used to validate the subset-weight
    formula; exponential, keep d <= 8.
    """
    phi = np.zeros(d)
    count = 0
    for order in permutations(range(d)):
        mask = 0
        for j in order:
            new = mask | (1 << j)
            phi[j] += costs[new] - costs[mask]
            mask = new
        count += 1
    return phi / count


def run_game_suite(
    seed: int, *, n_tables: int = 100, d_max: int = 6
) -> list[CheckResult]:
    """Attribution algebra on random cost tables."""
    rng = np.random.default_rng(seed)
    checks: list[CheckResult] = []
    eff_worst = 0.0
    d2_worst = 0.0
    brute_worst = 0.0
    for _ in range(n_tables):
        d = int(rng.integers(1, d_max + 1))
        costs = rng.standard_normal(2**d)
        costs[0] = 0.0
        table = game.CoalitionTable(
            distressed=tuple(f"i{j}" for j in range(d)), costs=costs
        )
        phi = game.shapley(table)
        beta = game.banzhaf(table)
        total = float(table.costs[-1])
        eff_worst = max(
            eff_worst, abs(phi.sum() - total) / max(1.0, abs(total))
        )
        if d == 2:
            d2_worst = max(d2_worst, float(np.max(np.abs(phi - beta))))
        if d <= 5:
            brute = shapley_by_permutations(table.costs, d)
            brute_worst = max(brute_worst, float(np.max(np.abs(phi - brute))))
    checks.append(
        CheckResult(
            name="game shapley efficiency",
            discrepancy=eff_worst,
            tolerance=1e-10,
            passed=eff_worst <= 1e-10,
            detail=f"worst relative gap over {n_tables} tables",
        )
    )
    checks.append(
        CheckResult(
            name="game d=2 banzhaf==shapley",
            discrepancy=d2_worst,
            tolerance=1e-12,
            passed=d2_worst <= 1e-12,
        )
    )
    checks.append(
        CheckResult(
            name="game permutation brute force",
            discrepancy=brute_worst,
            tolerance=1e-12,
            passed=brute_worst <= 1e-12,
            detail="d <= 5 tables",
        )
    )

    # dummy player: additive game with one zero-valued singleton
    d = 4
    singles = rng.standard_normal(d)
    singles[2] = 0.0
    costs = np.zeros(2**d)
    for mask in range(1, 2**d):
        costs[mask] = sum(singles[j] for j in range(d) if mask >> j & 1)
    table = game.CoalitionTable(
        distressed=tuple(f"i{j}" for j in range(d)), costs=costs
    )
    phi = game.shapley(table)
    beta = game.banzhaf(table)
    dummy_err = max(abs(phi[2]), abs(beta[2]))
    checks.append(
        CheckResult(
            name="game dummy player",
            discrepancy=dummy_err,
            tolerance=1e-12,
            passed=bool(
                dummy_err <= 1e-12 and game.is_dummy(table, "i2", tol=1e-12)
            ),
            detail="additive game, zero singleton",
        )
    )
    return checks


def run_validation(
    seed: int,
    *,
    n_specs: int = 20,
    n_draws: int = 10**6,
    se_mult: float = 4.0,
    rho_max: float = 0.95,
    tau1: float = 0.05,
    tau2: float = 0.05,
    scovar_fn: Callable[..., float] | None = None,
    scoes_fn: Callable[..., float] | None = None,
) -> ValidationReport:
    """Full oracle + game suite, deterministically keyed by seed."""
    checks = run_oracle_suite(
        seed,
        n_specs=n_specs,
        n_draws=n_draws,
        se_mult=se_mult,
        rho_max=rho_max,
        tau1=tau1,
        tau2=tau2,
        scovar_fn=scovar_fn,
        scoes_fn=scoes_fn,
    )
    checks.extend(run_game_suite(seed))
    return ValidationReport(
        seed=seed,
        n_draws=n_draws,
        n_specs=n_specs,
        se_mult=se_mult,
        checks=tuple(checks),
    )
