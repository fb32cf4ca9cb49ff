"""Cooperative cost game over coalitions of distressed institutions.

The cost of a coalition S is the weighted average, over the safe
institutions, of the spread between each safe institution's unconditional
Gaussian tail mean and its conditional tail mean given S's joint distress:

    c(S) = (1/|W|) * sum_{i in W} alpha_i * [es_i - scoes_{i|S}], c(∅) = 0.

Coalitions are encoded as bitmasks over the distressed ordering. Cost
tables enumerate all 2^d coalitions once (each conditional solve runs
exactly once per (i, S)); Shapley and Banzhaf attributions, dummy
detection, core (no-undercut) checks and subadditivity scans are pure
reads of the table.

Shapley weights (d - s)! (s - 1)! / d! are evaluated as 1 / (d * C(d-1,
s-1)) with exact integer binomials, so they are correct for any table the
2^d enumeration can reach. Scalar cost evaluation and table construction
share one code path with fixed accumulation order, so a table entry equals
a fresh `coalition_cost` call bit-for-bit.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .covariance import GaussianModel
from .gauss import DegenerateRegionError, _bvn_lower, _truncated_mean
from .measures import RiskConfig, _scovar_std, gaussian_es

__all__ = [
    "InstitutionPartition",
    "CoalitionTable",
    "AttributionResult",
    "coalition_cost",
    "build_table",
    "shapley",
    "banzhaf",
    "is_dummy",
    "check_no_undercut",
    "is_subadditive",
]

MAX_COALITION_SIZE = 20


@dataclass(frozen=True)
class InstitutionPartition:
    """Ordered split of the institution universe into distressed and safe."""

    institutions: tuple[str, ...]
    distressed: tuple[str, ...]
    safe: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        institutions = tuple(self.institutions)
        distressed = tuple(self.distressed)
        if len(set(institutions)) != len(institutions):
            raise ValueError("duplicate institution names")
        if len(set(distressed)) != len(distressed):
            raise ValueError("duplicate distressed names")
        missing = [d for d in distressed if d not in institutions]
        if missing:
            raise ValueError(f"distressed institutions not in universe: {missing}")
        safe = tuple(n for n in institutions if n not in distressed)
        if not distressed or not safe:
            raise ValueError("both distressed and safe sets must be nonempty")
        object.__setattr__(self, "institutions", institutions)
        object.__setattr__(self, "distressed", distressed)
        object.__setattr__(self, "safe", safe)

    @property
    def d(self) -> int:
        return len(self.distressed)


@dataclass(frozen=True)
class CoalitionTable:
    """Costs of every coalition S ⊆ D, indexed by bitmask over D's order."""

    distressed: tuple[str, ...]
    costs: np.ndarray

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        d = len(self.distressed)
        if costs.shape != (2**d,):
            raise ValueError(
                f"costs must have 2^{d} = {2 ** d} entries, got {costs.shape}"
            )
        if costs[0] != 0.0:
            raise ValueError(f"empty coalition must cost exactly 0, got {costs[0]}")
        if not np.all(np.isfinite(costs)):
            raise ValueError("non-finite coalition cost")
        costs = costs.copy()
        costs.flags.writeable = False
        object.__setattr__(self, "distressed", tuple(self.distressed))
        object.__setattr__(self, "costs", costs)

    @property
    def d(self) -> int:
        return len(self.distressed)

    def mask_of(self, members: Iterable[str]) -> int:
        mask = 0
        for name in members:
            mask |= 1 << self.distressed.index(name)
        return mask

    def members_of(self, mask: int) -> tuple[str, ...]:
        return tuple(
            name for j, name in enumerate(self.distressed) if mask >> j & 1
        )

    def cost(self, members: Iterable[str]) -> float:
        return float(self.costs[self.mask_of(members)])


@dataclass(frozen=True)
class AttributionResult:
    """Per-window attribution: Shapley and Banzhaf vectors plus the total."""

    window_date: dt.date
    distressed: tuple[str, ...]
    shapley: np.ndarray
    banzhaf: np.ndarray
    total: float

    def __post_init__(self):
        phi = np.asarray(self.shapley, dtype=float)
        beta = np.asarray(self.banzhaf, dtype=float)
        d = len(self.distressed)
        if phi.shape != (d,) or beta.shape != (d,):
            raise ValueError("attribution vectors inconsistent with roster")
        if abs(float(phi.sum()) - self.total) > 1e-10 * max(1.0, abs(self.total)):
            raise ValueError(
                f"Shapley efficiency violated: sum {phi.sum()} vs total {self.total}"
            )
        if d == 2 and np.max(np.abs(phi - beta)) > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError("d=2 requires Banzhaf == Shapley")
        phi = phi.copy()
        beta = beta.copy()
        phi.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "shapley", phi)
        object.__setattr__(self, "banzhaf", beta)
        object.__setattr__(self, "distressed", tuple(self.distressed))


def _resolve_weights(part: InstitutionPartition, cfg: RiskConfig) -> np.ndarray:
    w = len(part.safe)
    if cfg.weights is None:
        return np.ones(w)
    try:
        alpha = np.array([float(cfg.weights[name]) for name in part.safe])
    except KeyError as e:
        raise ValueError(f"missing weight for safe institution {e.args[0]!r}") from None
    if np.any(alpha < 0):
        raise ValueError("weights must be nonnegative")
    if abs(float(alpha.sum()) - w) > 1e-12 * max(1.0, w):
        raise ValueError(
            f"weights must sum to |W| = {w}, got {alpha.sum()}"
        )
    return alpha


def _costs_for_masks(
    model: GaussianModel,
    part: InstitutionPartition,
    cfg: RiskConfig,
    masks: np.ndarray,
) -> np.ndarray:
    """Costs of the given nonempty coalitions, fixed accumulation order."""
    d = part.d
    d_idx = [model.index(name) for name in part.distressed]
    alpha = _resolve_weights(part, cfg)
    member = ((masks[:, None] >> np.arange(d)) & 1).astype(float)

    mu_s = np.zeros(len(masks))
    var_s = np.zeros(len(masks))
    for j in range(d):
        mu_s += member[:, j] * model.mu[d_idx[j]]
        for k in range(d):
            var_s += member[:, j] * member[:, k] * model.sigma[d_idx[j], d_idx[k]]
    if np.any(var_s <= 0.0):
        raise DegenerateRegionError("coalition sum has nonpositive variance")

    zk = float(ndtri(cfg.tau2))
    total = np.zeros(len(masks))
    for alpha_i, name in zip(alpha, part.safe):
        ii = model.index(name)
        mu_i = float(model.mu[ii])
        var_i = float(model.sigma[ii, ii])
        cov_is = np.zeros(len(masks))
        for j in range(d):
            cov_is += member[:, j] * model.sigma[ii, d_idx[j]]
        rho = np.clip(cov_is / np.sqrt(var_i * var_s), -1.0, 1.0)
        h, _ = _scovar_std(rho, cfg.tau1, cfg.tau2)
        p = _bvn_lower(h, zk, rho)
        if np.any(p <= 0.0):
            raise DegenerateRegionError(
                f"zero-probability distress region for safe institution {name!r}"
            )
        m = _truncated_mean(h, np.full_like(h, zk), rho, p)
        scoes_vals = mu_i + math.sqrt(var_i) * m
        es_i = gaussian_es(mu_i, var_i, cfg.tau1)
        total += alpha_i * (es_i - scoes_vals)
    return total / len(part.safe)


def coalition_cost(
    model: GaussianModel,
    part: InstitutionPartition,
    members: Iterable[str],
    cfg: RiskConfig,
) -> float:
    """Cost c(S) of one coalition; exactly 0 for the empty coalition.

    The empty case never invokes a conditional solve: with no institution
    under distress every ES-minus-conditional-tail-mean spread vanishes.
    Solver and degeneracy errors propagate tagged with the failing (i, S).
    """
    names = list(members)
    for n in names:
        if n not in part.distressed:
            raise ValueError(f"{n!r} is not a distressed institution")
    if len(set(names)) != len(names):
        raise ValueError("coalition has duplicate members")
    if not names:
        return 0.0
    mask = 0
    for n in names:
        mask |= 1 << part.distressed.index(n)
    try:
        return float(_costs_for_masks(model, part, cfg, np.array([mask]))[0])
    except (DegenerateRegionError,) as e:
        raise DegenerateRegionError(f"coalition {tuple(names)}: {e}") from e


def build_table(
    model: GaussianModel,
    part: InstitutionPartition,
    cfg: RiskConfig,
    *,
    max_coalition_size: int = MAX_COALITION_SIZE,
) -> CoalitionTable:
    """Enumerate all 2^d coalition costs, ordered by bitmask value."""
    d = part.d
    if d > max_coalition_size:
        raise ValueError(
            f"d = {d} exceeds the coalition cap {max_coalition_size}; raise "
            "max_coalition_size explicitly to enumerate 2^d coalitions"
        )
    costs = np.zeros(2**d)
    if d > 0:
        masks = np.arange(1, 2**d, dtype=np.int64)
        costs[1:] = _costs_for_masks(model, part, cfg, masks)
    return CoalitionTable(distressed=part.distressed, costs=costs)


def _shapley_weights(d: int) -> np.ndarray:
    # (d - s)!(s - 1)!/d! == 1/(d * C(d-1, s-1)), exact in binary floats
    # for every s,d the 2^d enumeration can reach
    return np.array(
        [0.0] + [1.0 / (d * math.comb(d - 1, s - 1)) for s in range(1, d + 1)]
    )


def shapley(table: CoalitionTable) -> np.ndarray:
    """Order-averaged marginal contributions; sums to the grand cost."""
    d = table.d
    costs = table.costs
    weights = _shapley_weights(d)
    sizes = np.array([int(m).bit_count() for m in range(2**d)])
    phi = np.zeros(d)
    for j in range(d):
        bit = 1 << j
        masks = np.flatnonzero((np.arange(2**d) & bit) != 0)
        marginals = costs[masks] - costs[masks ^ bit]
        phi[j] = float(weights[sizes[masks]] @ marginals)
    return phi


def banzhaf(table: CoalitionTable) -> np.ndarray:
    """Uniform-coalition average of marginal contributions, 2^{1-d} scaled."""
    d = table.d
    costs = table.costs
    beta = np.zeros(d)
    for j in range(d):
        bit = 1 << j
        masks = np.flatnonzero((np.arange(2**d) & bit) != 0)
        beta[j] = float((costs[masks] - costs[masks ^ bit]).sum()) / 2 ** (d - 1)
    return beta


def is_dummy(table: CoalitionTable, name: str, tol: float = 1e-12) -> bool:
    """Whether the institution's marginal contribution is always ~zero."""
    j = table.distressed.index(name)
    bit = 1 << j
    masks = np.flatnonzero((np.arange(2**table.d) & bit) != 0)
    return bool(np.all(np.abs(table.costs[masks] - table.costs[masks ^ bit]) <= tol))


def check_no_undercut(
    alloc: Sequence[float], table: CoalitionTable
) -> list[tuple[str, ...]]:
    """Coalitions charged more than their stand-alone cost by the allocation.

    Returns every S with sum_{j in S} alloc_j > c(S) + tol,
    tol = 1e-12 * max(1, |c(D)|); an empty list means the allocation is in
    the core of the cost game.
    """
    k = np.asarray(alloc, dtype=float)
    d = table.d
    if k.shape != (d,):
        raise ValueError(f"allocation must have {d} entries, got {k.shape}")
    tol = 1e-12 * max(1.0, abs(float(table.costs[-1])))
    alloc_sum = np.zeros(2**d)
    masks = np.arange(2**d)
    for j in range(d):
        alloc_sum += np.where((masks >> j) & 1, k[j], 0.0)
    bad = np.flatnonzero(alloc_sum > table.costs + tol)
    return [table.members_of(int(m)) for m in bad]


def is_subadditive(
    table: CoalitionTable, tol: float = 1e-12
) -> tuple[bool, tuple[tuple[str, ...], tuple[str, ...]] | None]:
    """Scan all disjoint nonempty pairs for c(S ∪ T) > c(S) + c(T) + tol.

    Returns (True, None) when subadditive, else (False, (S, T)) with the
    first violating pair in ascending bitmask order. Cost is O(3^d).
    """
    d = table.d
    costs = table.costs
    full = 2**d - 1
    for s_mask in range(1, full + 1):
        rest = full ^ s_mask
        t_mask = rest
        while t_mask:
            if costs[s_mask | t_mask] > costs[s_mask] + costs[t_mask] + tol:
                return False, (table.members_of(s_mask), table.members_of(t_mask))
            t_mask = (t_mask - 1) & rest
    return True, None
