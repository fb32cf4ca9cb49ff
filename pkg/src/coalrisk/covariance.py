"""Per-window Gaussian model fitting: sample moments and sparse estimation.

The sparse estimator maximizes the l1-penalized Gaussian log-likelihood

    log det Theta - trace(S Theta) - lam * sum_{j != k} |Theta_jk|

via block coordinate descent over columns, each sub-problem solved by a
coordinate-descent lasso (the algorithm of Friedman, Hastie & Tibshirani,
"Sparse inverse covariance estimation with the graphical lasso",
Biostatistics 9(3), 2008). The diagonal is unpenalized by default.

At the solution the stationarity conditions read, for j != k:

    sigma_jk - s_jk = lam * sign(theta_jk)   where theta_jk != 0
    |sigma_jk - s_jk| <= lam                 where theta_jk == 0

(verifiable against any convex solver; `kkt_residuals` measures the worst
violation). After the configured stopping rule is met, extra polish sweeps
run to a much tighter fixed point so that the returned sigma and theta are
mutually inverse to ~1e-12 while theta keeps its exact zeros.

λ convention: the default penalty 2 * sqrt(ln(p) / n) uses the natural
logarithm, the convention of the sparse-estimation consistency theory the
default is taken from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .panel import ReturnPanel

__all__ = [
    "ConvergenceError",
    "EstimatorConfig",
    "GaussianModel",
    "sample_moments",
    "default_lambda",
    "graphical_lasso",
    "kkt_residuals",
]


class ConvergenceError(RuntimeError):
    """Estimator failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class EstimatorConfig:
    """Graphical lasso settings.

    lam: nonnegative l1 penalty on off-diagonal precision entries.
    tol: outer stopping rule — mean absolute change of off-diagonal sigma
        entries per sweep, relative to the mean absolute off-diagonal of s.
    use_correlation: estimate on the correlation matrix and rescale back
        (default off: the penalty applies to covariance directly).
    """

    lam: float
    tol: float = 1e-6
    max_iter: int = 200
    penalize_diagonal: bool = False
    use_correlation: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class GaussianModel:
    """Fitted joint Gaussian law for p institutions."""

    mu: np.ndarray
    sigma: np.ndarray
    theta: np.ndarray | None
    labels: tuple[str, ...]

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        p = mu.shape[0]
        if mu.ndim != 1 or sigma.shape != (p, p) or len(self.labels) != p:
            raise ValueError("inconsistent mu/sigma/labels dimensions")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
            raise ValueError("sigma is not symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ValueError("sigma is not positive definite") from None
        theta = self.theta
        if theta is None:
            theta = np.linalg.inv(sigma)
            theta = (theta + theta.T) / 2.0
        else:
            theta = np.asarray(theta, dtype=float)
            if theta.shape != (p, p):
                raise ValueError("theta shape inconsistent with sigma")
        if np.max(np.abs(theta @ sigma - np.eye(p))) > 1e-8:
            raise ValueError("theta is not the inverse of sigma (residual > 1e-8)")
        mu = mu.copy()
        sigma = sigma.copy()
        theta = theta.copy()
        for arr in (mu, sigma, theta):
            arr.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    def index(self, name: str) -> int:
        return self.labels.index(name)


def sample_moments(window: ReturnPanel) -> tuple[np.ndarray, np.ndarray]:
    """Column means and maximum-likelihood (1/N) sample covariance.

    The window must be fully observed (no NaN); rolling_windows guarantees
    this for its outputs.
    """
    values = np.asarray(window.values, dtype=float)
    n = values.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 rows for sample moments, got {n}")
    if not np.all(np.isfinite(values)):
        raise ValueError("window contains missing values")
    mu = values.mean(axis=0)
    centered = values - mu
    s = centered.T @ centered / n
    return mu, s


def default_lambda(p: int, n: int) -> float:
    """Paper-default sparsity penalty 2 * sqrt(ln(p) / n), natural log."""
    if p < 1 or n < 1:
        raise ValueError(f"p and n must be >= 1, got p={p}, n={n}")
    return 2.0 * math.sqrt(math.log(p) / n)


def _lasso_cd(v: np.ndarray, s12: np.ndarray, lam: float, beta: np.ndarray) -> np.ndarray:
    """Coordinate descent for min 1/2 b'Vb - s12'b + lam |b|_1, warm-started."""
    m = beta.shape[0]
    if m == 0:
        return beta
    tol = 1e-14 * max(1.0, float(np.max(np.abs(s12))))
    for _ in range(1000):
        delta = 0.0
        for i in range(m):
            old = beta[i]
            grad = s12[i] - (v[i] @ beta) + v[i, i] * old
            new = math.copysign(max(abs(grad) - lam, 0.0), grad) / v[i, i]
            if new != old:
                beta[i] = new
                delta = max(delta, abs(new - old))
        if delta <= tol:
            break
    return beta


def graphical_lasso(
    s: np.ndarray,
    cfg: EstimatorConfig,
    *,
    mu: np.ndarray | None = None,
    labels: tuple[str, ...] | None = None,
) -> GaussianModel:
    """Sparse (sigma, theta) estimate from a sample covariance s.

    Raises ConvergenceError if the stopping rule is not met within
    cfg.max_iter sweeps. lam=0 reproduces the unpenalized MLE sigma = s.
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    if s.ndim != 2 or s.shape != (p, p):
        raise ValueError(f"s must be square, got shape {s.shape}")
    if np.max(np.abs(s - s.T)) > 1e-10 * max(1.0, float(np.max(np.abs(s)))):
        raise ValueError("s is not symmetric")
    if np.any(np.diag(s) <= 0):
        raise ValueError("s must have strictly positive diagonal")
    if labels is None:
        labels = tuple(f"x{j}" for j in range(p))
    if mu is None:
        mu = np.zeros(p)

    if cfg.use_correlation:
        d = np.sqrt(np.diag(s))
        corr = s / np.outer(d, d)
        np.fill_diagonal(corr, 1.0)
        inner = EstimatorConfig(
            lam=cfg.lam,
            tol=cfg.tol,
            max_iter=cfg.max_iter,
            penalize_diagonal=cfg.penalize_diagonal,
            use_correlation=False,
        )
        base = graphical_lasso(corr, inner)
        sigma = base.sigma * np.outer(d, d)
        theta = base.theta / np.outer(d, d)
        return GaussianModel(mu=mu, sigma=sigma, theta=theta, labels=labels)

    lam = cfg.lam
    w = s.copy()
    if cfg.penalize_diagonal:
        w[np.diag_indices(p)] += lam

    if p == 1:
        sigma = w
        theta = np.array([[1.0 / w[0, 0]]])
        return GaussianModel(mu=mu, sigma=sigma, theta=theta, labels=labels)

    betas = np.zeros((p, p - 1))
    off = ~np.eye(p, dtype=bool)
    off_scale = float(np.mean(np.abs(s[off])))
    spec_tol = cfg.tol * off_scale if off_scale > 0 else cfg.tol
    polish_tol = 1e-13 * float(np.mean(np.abs(np.diag(s))))

    def sweep() -> float:
        biggest = 0.0
        for j in range(p):
            rest = [i for i in range(p) if i != j]
            v11 = w[np.ix_(rest, rest)]
            s12 = s[rest, j]
            beta = _lasso_cd(v11, s12, lam, betas[j])
            new_w12 = v11 @ beta
            change = np.abs(new_w12 - w[rest, j])
            if change.size:
                biggest = max(biggest, float(change.max()))
            w[rest, j] = new_w12
            w[j, rest] = new_w12
        return biggest

    converged = False
    mean_change = math.inf
    for _ in range(cfg.max_iter):
        w_prev = w[off].copy()
        sweep()
        mean_change = float(np.mean(np.abs(w[off] - w_prev)))
        if mean_change < spec_tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"graphical lasso did not converge in {cfg.max_iter} sweeps",
            mean_change,
        )

    # Polish to a tight fixed point so theta (assembled from the final
    # betas) inverts sigma to roundoff while keeping exact zeros.
    last = math.inf
    for _ in range(10 * cfg.max_iter):
        last = sweep()
        if last <= polish_tol:
            break
    else:
        raise ConvergenceError("graphical lasso polish phase stalled", last)

    theta = np.zeros((p, p))
    for j in range(p):
        rest = [i for i in range(p) if i != j]
        beta = betas[j]
        theta_jj = 1.0 / (w[j, j] - float(w[rest, j] @ beta))
        theta[j, j] = theta_jj
        theta[rest, j] = -beta * theta_jj
    theta = (theta + theta.T) / 2.0
    return GaussianModel(mu=mu, sigma=w, theta=theta, labels=labels)


def kkt_residuals(
    s: np.ndarray,
    sigma: np.ndarray,
    theta: np.ndarray,
    lam: float,
    *,
    penalize_diagonal: bool = False,
    zero_tol: float = 0.0,
) -> float:
    """Worst violation of the graphical-lasso stationarity conditions.

    Off-diagonal entries with |theta_jk| <= zero_tol are treated as zeros
    (box condition |sigma_jk - s_jk| <= lam); the rest must satisfy
    sigma_jk - s_jk = lam * sign(theta_jk). Diagonal: sigma_jj = s_jj
    (+ lam when penalized).
    """
    s = np.asarray(s, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    theta = np.asarray(theta, dtype=float)
    p = s.shape[0]
    diff = sigma - s
    worst = 0.0
    for j in range(p):
        target = lam if penalize_diagonal else 0.0
        worst = max(worst, abs(diff[j, j] - target))
        for k in range(p):
            if k == j:
                continue
            if abs(theta[j, k]) <= zero_tol:
                worst = max(worst, max(0.0, abs(diff[j, k]) - lam))
            else:
                worst = max(worst, abs(diff[j, k] - lam * math.copysign(1.0, theta[j, k])))
    return worst
