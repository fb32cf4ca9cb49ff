"""Scalar and bivariate Gaussian primitives.

Everything downstream (tail thresholds, conditional quantiles, conditional
tail means) reduces to five operations on the standard normal law: the
density, the CDF, its inverse, the bivariate lower-orthant probability
P(Z1 <= h, Z2 <= k), and the truncated lower-tail mean
E[Z1 | Z1 <= h, Z2 <= k].

The bivariate CDF follows the double-precision single-integral reduction of
Drezner & Wesolowsky (1990), "On the computation of the bivariate normal
integral", J. Statist. Comput. Simul. 35, 101-107, with the modifications of
Genz (2004), "Numerical computation of rectangular bivariate and trivariate
normal and t probabilities", Statistics and Computing 14, 251-260 (the BVND
routine distributed in TVPACK and ported into scipy's mvndst). Reported
absolute accuracy is ~5e-16; we target and test 1e-12. One deliberate
simplification: the 20-point Gauss-Legendre rule is used for every
|rho| < 0.925 instead of switching to 6/12 points at low correlation — same
quadrature, never less accurate, and it vectorizes without per-element node
selection.

All functions accept scalars or numpy arrays (broadcast together) and are
pure; concurrent use is safe.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

__all__ = [
    "DegenerateRegionError",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_quantile",
    "bvn_lower_cdf",
    "truncated_bvn_lower_mean",
]

# |rho| at or beyond this is treated as exactly +/-1: sqrt(1 - rho^2) would
# underflow into noise before rho reaches 1.
DEGENERATE_RHO = 1.0 - 1e-12

# Probabilities below this are clamped to exact 0 to keep downstream ratios
# free of denormal noise.
TINY_PROB = 1e-300

_SQRT_2PI = np.sqrt(2.0 * np.pi)
_INV_SQRT_2PI = 1.0 / _SQRT_2PI

# 10-point Gauss-Legendre abscissae/weights on (-1, 1), positive half.
_GL_X = np.array(
    [
        0.07652652113349733,
        0.2277858511416451,
        0.3737060887154196,
        0.5108670019508271,
        0.6360536807265150,
        0.7463319064601508,
        0.8391169718222188,
        0.9122344282513259,
        0.9639719272779138,
        0.9931285991850949,
    ]
)
_GL_W = np.array(
    [
        0.1527533871307259,
        0.1491729864726037,
        0.1420961093183821,
        0.1316886384491766,
        0.1181945319615184,
        0.1019301198172404,
        0.08327674157670475,
        0.06267204833410906,
        0.04060142980038694,
        0.01761400713915212,
    ]
)
# Doubled node sets used by both branches of the BVN algorithm.
_NODES_01 = np.concatenate([(1.0 - _GL_X) / 2.0, (1.0 + _GL_X) / 2.0])  # on (0, 1)
_NODES_02 = np.concatenate([1.0 - _GL_X, 1.0 + _GL_X])  # on (0, 2)
_W2 = np.concatenate([_GL_W, _GL_W])


class DegenerateRegionError(ValueError):
    """The conditioning region carries zero probability."""


def _validate_finite(name, x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


def std_normal_pdf(x):
    """Standard normal density phi(x)."""
    x = _validate_finite("x", x)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def std_normal_cdf(x):
    """Standard normal CDF Phi(x), full double precision via erfc."""
    x = _validate_finite("x", x)
    return ndtr(x)


def std_normal_quantile(p):
    """Inverse standard normal CDF; requires 0 < p < 1."""
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    return ndtri(p)


def _bvn_moderate(h_up, k_up, rho):
    """Drezner-Wesolowsky single integral for |rho| < 0.925.

    Arguments are the *upper*-orthant limits (already negated); returns
    P(X > h_up, Y > k_up).
    """
    hk = h_up * k_up
    hs = 0.5 * (h_up * h_up + k_up * k_up)
    asr = np.arcsin(rho)
    sn = np.sin(asr[..., None] * _NODES_01)
    integrand = np.exp((sn * hk[..., None] - hs[..., None]) / (1.0 - sn * sn))
    # np.sum's reduction tree depends only on the node axis, so results are
    # identical whether one spec or a whole batch is evaluated
    total = np.sum(integrand * _W2, axis=-1)
    return total * asr / (4.0 * np.pi) + ndtr(-h_up) * ndtr(-k_up)


def _bvn_high(h_up, k_up, rho):
    """Genz's transformed integral for 0.925 <= |rho| < 1 (upper orthant)."""
    h = h_up.copy()
    k = k_up.copy()
    hk = h * k
    neg = rho < 0
    k = np.where(neg, -k, k)
    hk = np.where(neg, -hk, hk)

    a_sq = (1.0 - rho) * (1.0 + rho)
    a = np.sqrt(a_sq)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0

    e0 = -(bs / a_sq + hk) / 2.0
    bvn = a * np.exp(e0) * (
        1.0 - c * (bs - a_sq) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_sq * a_sq / 5.0
    )

    # exp(-hk/2) * Phi(-b/a) combined in log space: either factor alone can
    # overflow/underflow while the product is tame.
    b = np.sqrt(bs)
    log_phi = log_ndtr(-b / a)
    expo = np.where(np.isneginf(log_phi), -np.inf, -hk / 2.0 + log_phi)
    bvn = bvn - np.exp(expo) * _SQRT_2PI * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)

    a2 = a / 2.0
    xs = (a2[..., None] * _NODES_02) ** 2
    rs = np.sqrt(1.0 - xs)
    e1 = -(bs[..., None] / xs + hk[..., None]) / 2.0
    e_extra = -hk[..., None] * (1.0 - rs) / (2.0 * (1.0 + rs))
    poly = 1.0 + c[..., None] * xs * (1.0 + d[..., None] * xs)
    integrand = np.exp(e1 + e_extra) / rs - np.exp(e1) * poly
    bvn = bvn + a2 * np.sum(integrand * _W2, axis=-1)
    bvn = -bvn / (2.0 * np.pi)

    pos_part = bvn + ndtr(-np.maximum(h, k))
    neg_part = -bvn + np.maximum(0.0, ndtr(-h) - ndtr(-k))
    return np.where(neg, neg_part, pos_part)


def _bvn_lower(h, k, rho):
    """P(Z1 <= h, Z2 <= k) for standard bivariate normal; no validation.

    Inputs must be broadcast-compatible float arrays. The (h, k) pair is
    canonically ordered so that swapping arguments gives bit-identical
    results.
    """
    h, k, rho = np.broadcast_arrays(h, k, rho)
    shape = h.shape
    h = np.atleast_1d(h)
    k = np.atleast_1d(k)
    rho = np.atleast_1d(rho)
    lo = np.minimum(h, k)
    hi = np.maximum(h, k)

    out = np.empty(lo.shape, dtype=float)
    abs_rho = np.abs(rho)
    pos1 = rho >= DEGENERATE_RHO
    neg1 = rho <= -DEGENERATE_RHO
    indep = rho == 0.0
    moderate = ~pos1 & ~neg1 & ~indep & (abs_rho < 0.925)
    high = ~pos1 & ~neg1 & ~indep & (abs_rho >= 0.925)

    if pos1.any():
        out[pos1] = ndtr(lo[pos1])
    if neg1.any():
        out[neg1] = np.maximum(0.0, ndtr(lo[neg1]) + ndtr(hi[neg1]) - 1.0)
    if indep.any():
        out[indep] = ndtr(lo[indep]) * ndtr(hi[indep])
    if moderate.any():
        out[moderate] = _bvn_moderate(-lo[moderate], -hi[moderate], rho[moderate])
    if high.any():
        out[high] = _bvn_high(-lo[high], -hi[high], rho[high])

    out = np.clip(out, 0.0, 1.0)
    out[out < TINY_PROB] = 0.0
    return out.reshape(shape)


def bvn_lower_cdf(h, k, rho):
    """Lower-orthant probability P(Z1 <= h, Z2 <= k) at correlation rho.

    Symmetric in (h, k) exactly; nondecreasing in h, k and rho. Absolute
    accuracy better than 1e-12 over the full correlation range (see module
    docstring for the algorithm provenance). Probabilities that underflow
    below 1e-300 are clamped to exact 0 and reported via RuntimeWarning.
    """
    h = _validate_finite("h", h)
    k = _validate_finite("k", k)
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)) or np.any(np.abs(rho) > 1.0):
        raise ValueError(f"rho must satisfy -1 <= rho <= 1, got {rho!r}")
    scalar = np.ndim(h) == 0 and np.ndim(k) == 0 and np.ndim(rho) == 0
    p = _bvn_lower(h, k, rho)
    raw = _bvn_raw_nonzero(h, k, rho)
    if np.any((p == 0.0) & raw):
        warnings.warn(
            "bivariate normal probability below 1e-300 clamped to 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(p) if scalar else p


def _bvn_raw_nonzero(h, k, rho):
    """Whether the exact orthant probability is mathematically positive."""
    h, k, rho = np.broadcast_arrays(h, k, rho)
    # Zero probability only in the comonotone limits with incompatible
    # thresholds; everywhere else the Gaussian support is the whole plane.
    impossible = (rho <= -DEGENERATE_RHO) & (ndtr(h) + ndtr(k) <= 1.0)
    return ~impossible


def truncated_bvn_lower_mean(h, k, rho):
    """E[Z1 | Z1 <= h, Z2 <= k] for a standard bivariate normal pair.

    Uses the closed form
        -[phi(h) Phi((k - rho h)/s) + rho phi(k) Phi((h - rho k)/s)] / P,
    s = sqrt(1 - rho^2), P = bvn_lower_cdf(h, k, rho), falling back to the
    exact univariate limit when |rho| >= 1 - 1e-12. Always <= h.

    Raises DegenerateRegionError when the conditioning event has zero
    probability.
    """
    h = _validate_finite("h", h)
    k = _validate_finite("k", k)
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)) or np.any(np.abs(rho) > 1.0):
        raise ValueError(f"rho must satisfy -1 <= rho <= 1, got {rho!r}")
    scalar = np.ndim(h) == 0 and np.ndim(k) == 0 and np.ndim(rho) == 0
    p = _bvn_lower(h, k, rho)
    if np.any(p <= 0.0):
        raise DegenerateRegionError(
            "conditioning region {Z1 <= h, Z2 <= k} has zero probability"
        )
    m = _truncated_mean(h, k, rho, p)
    return float(m) if scalar else m


def _truncated_mean(h, k, rho, p):
    """Truncated-mean kernel; assumes p > 0 elementwise, no validation."""
    h, k, rho, p = np.broadcast_arrays(h, k, rho, p)
    shape = h.shape
    h = np.atleast_1d(h)
    k = np.atleast_1d(k)
    rho = np.atleast_1d(rho)
    p = np.atleast_1d(p)
    out = np.empty(h.shape, dtype=float)

    pos1 = rho >= DEGENERATE_RHO
    neg1 = rho <= -DEGENERATE_RHO
    general = ~pos1 & ~neg1

    if pos1.any():
        # Z2 = Z1: single constraint at min(h, k).
        m = np.minimum(h[pos1], k[pos1])
        out[pos1] = -std_normal_pdf(m) / ndtr(m)
    if neg1.any():
        # Z2 = -Z1: two-sided constraint -k <= Z1 <= h.
        hh = h[neg1]
        kk = k[neg1]
        out[neg1] = (std_normal_pdf(kk) - std_normal_pdf(hh)) / p[neg1]
    if general.any():
        hg = h[general]
        kg = k[general]
        rg = rho[general]
        s = np.sqrt((1.0 - rg) * (1.0 + rg))
        num = std_normal_pdf(hg) * ndtr((kg - rg * hg) / s)
        num += rg * std_normal_pdf(kg) * ndtr((hg - rg * kg) / s)
        out[general] = -num / p[general]
    return out.reshape(shape)
