"""Borrowing-amount rules: maxML (closed form and grid search), cminMSE, minMSE.

Notation: s1 summarizes the external source, s0 the internal one;
delta = s1.mean - s0.mean. The estimator-scale weight a multiplies the
external mean in the combination (mu0 + a*mu1)/(1+a); a0 is the equivalent
likelihood-scale discount via a = a0 * var0/var1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import (
    DegenerateVariance,
    InvalidConfig,
    InvalidCounts,
    InvalidGrid,
    InvalidWeight,
    SummaryStats,
)

# default discount grid, 51 equispaced points on [0, 1]
DEFAULT_GRID = np.arange(51) / 50.0


class RuleVariant(enum.Enum):
    MAXML = "maxml"
    CMINMSE = "cminmse"
    MINMSE = "minmse"


@dataclass(frozen=True)
class BorrowingRule:
    """Tagged rule choice with its parameters.

    eta weights the bias term in the minMSE objective (minMSE only,
    default 1); cap bounds the external contribution as a fraction of the
    internal sample's weight (a <= cap).
    """

    variant: RuleVariant
    eta: float = 1.0
    cap: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta >= 0.0):
            raise InvalidConfig("eta must be finite and >= 0")
        if not (np.isfinite(self.cap) and self.cap > 0.0):
            raise InvalidConfig("cap must be finite and > 0")

    @classmethod
    def from_name(cls, name: str, eta: float = 1.0, cap: float = 1.0) -> "BorrowingRule":
        for variant in RuleVariant:
            if variant.value == name:
                return cls(variant=variant, eta=eta, cap=cap)
        raise InvalidConfig(f"unknown rule {name!r}")


@dataclass(frozen=True)
class BorrowAmount:
    """Resolved amount of borrowing: estimator-scale a, optional a0, cap flag."""

    a: float
    a0: Optional[float] = None
    capped: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a >= 0.0):
            raise InvalidWeight("a must be finite and >= 0")
        if self.a0 is not None and not (0.0 <= self.a0 <= 1.0):
            raise InvalidWeight("a0 must lie in [0, 1]")


def apply_cap(a: float, cap: float):
    """Clip a at cap; returns (a_capped, was_capped). The boundary a == cap
    is not counted as capped."""
    if not a >= 0.0:
        raise InvalidWeight("a must be >= 0")
    if not cap > 0.0:
        raise InvalidConfig("cap must be > 0")
    return (min(a, cap), a > cap)


def _denominator(s1: SummaryStats, s0: SummaryStats) -> float:
    # Shared by maxml_normal and cminmse so their equivalence is exact in
    # floating point, not just algebraically.
    delta = s1.mean - s0.mean
    return max(delta * delta, s1.var_of_mean + s0.var_of_mean) - s0.var_of_mean


def _implied_a0(a: float, v1: float, v0: float) -> float:
    if v0 > 0.0:
        return min(1.0, a * v1 / v0)
    return 0.0


def maxml_normal(s1: SummaryStats, s0: SummaryStats, cap: float = math.inf) -> BorrowAmount:
    """Marginal-likelihood-maximizing discount for normal summaries.

    a0 = var1 / (max(delta^2, var1 + var0) - var0), in [0, 1] analytically
    (clamped against a one-ulp overshoot); a = a0 * var0/var1 reported on the
    estimator scale and capped at cap.
    """
    v1, v0 = s1.var_of_mean, s0.var_of_mean
    if not v1 > 0.0:
        raise DegenerateVariance("external var_of_mean is zero; maxML is undefined")
    d = _denominator(s1, s0)
    if not d > 0.0:
        raise DegenerateVariance("degenerate denominator in the maxML closed form")
    a0 = min(1.0, v1 / d)
    a, capped = apply_cap(v0 / d, cap)
    if capped:
        a0 = min(a0, cap * v1 / v0)
    return BorrowAmount(a=a, a0=a0, capped=capped)


def cminmse(s1: SummaryStats, s0: SummaryStats, cap: float = math.inf) -> BorrowAmount:
    """Variance-corrected MSE-minimizing weight.

    a = var0 / max(delta^2 - var0, var1), capped at cap. Equivalent to
    maxml_normal on the a scale; both compute the identical expression so the
    equality is exact.
    """
    v1, v0 = s1.var_of_mean, s0.var_of_mean
    d = _denominator(s1, s0)
    if not d > 0.0:
        raise DegenerateVariance(
            "both candidate denominators are zero (delta^2 <= var0 and var1 = 0)")
    a0 = min(1.0, v1 / d)
    a, capped = apply_cap(v0 / d, cap)
    if capped and v0 > 0.0:
        a0 = min(a0, cap * v1 / v0)
    return BorrowAmount(a=a, a0=a0, capped=capped)


def minmse(s1: SummaryStats, s0: SummaryStats, eta: float = 1.0,
           cap: float = math.inf) -> BorrowAmount:
    """Simplified MSE-minimizing weight, with the bias-weighted extension.

    a = var0 / (var1 + eta^2 delta^2), capped at cap. eta = 1 recovers the
    plain rule; eta = 0 is pure inverse-variance weighting.
    """
    if not (np.isfinite(eta) and eta >= 0.0):
        raise InvalidConfig("eta must be finite and >= 0")
    v1, v0 = s1.var_of_mean, s0.var_of_mean
    delta = s1.mean - s0.mean
    denom = v1 + (eta * eta) * (delta * delta)
    if not denom > 0.0:
        raise DegenerateVariance("var1 + (eta*delta)^2 is zero; minMSE is undefined")
    a, capped = apply_cap(v0 / denom, cap)
    return BorrowAmount(a=a, a0=_implied_a0(a, v1, v0), capped=capped)


def maxml_binomial(y1_sum, n1, y0_sum, n0, grid=None, cap: float = math.inf) -> BorrowAmount:
    """Grid-search marginal-likelihood discount for binomial counts.

    Maximizes lbeta(a0 y1 + y0 + 1, a0 (n1-y1) + n0 - y0 + 1)
    - lbeta(a0 y1 + 1, a0 (n1-y1) + 1) over an ascending grid in [0, 1];
    exact ties take the largest grid value (this biases toward more borrowing
    under flat likelihoods). The cap acts on the a0 scale as
    a0 <= cap * n0/n1, equivalent to a <= cap. Non-integer counts are
    accepted (weighted totals from the bootstrap); n1 = 0 is allowed and
    yields a = 0 with a flat likelihood.
    """
    if n0 < 1 or not np.isfinite(n0):
        raise InvalidCounts(f"need n0 >= 1, got {n0}")
    if n1 < 0 or not np.isfinite(n1):
        raise InvalidCounts(f"need n1 >= 0, got {n1}")
    for y, n, label in ((y1_sum, n1, "y1_sum"), (y0_sum, n0, "y0_sum")):
        if not np.isfinite(y) or y < 0 or y > n:
            raise InvalidCounts(f"{label} must lie in [0, n], got {y}")
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    _check_grid(grid)
    a0 = float(_kernels.binom_grid_best_a0(grid, [y1_sum], n1, [y0_sum], n0)[0])
    capped = False
    if n1 > 0:
        bound = cap * n0 / n1
        if a0 > bound:
            a0 = bound
            capped = True
        a, capped_a = apply_cap(a0 * n1 / n0, cap)
        capped = capped or capped_a
    else:
        a = 0.0
    return BorrowAmount(a=a, a0=min(1.0, a0), capped=capped)


def _check_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidGrid("grid must be a nonempty vector")
    if not np.all(np.isfinite(grid)):
        raise InvalidGrid("grid values must be finite")
    if grid[0] < 0.0 or grid[-1] > 1.0 or np.any(np.diff(grid) < 0.0):
        raise InvalidGrid("grid must be ascending within [0, 1]")


def evaluate(rule: BorrowingRule, s1: SummaryStats, s0: SummaryStats) -> BorrowAmount:
    """Apply a rule (normal-summaries form) with its cap and eta."""
    if rule.variant is RuleVariant.MAXML:
        return maxml_normal(s1, s0, cap=rule.cap)
    if rule.variant is RuleVariant.CMINMSE:
        return cminmse(s1, s0, cap=rule.cap)
    return minmse(s1, s0, eta=rule.eta, cap=rule.cap)


# ---------------------------------------------------------------------------
# Vectorized variants used by the bootstrap engine. These apply the same
# floating-point expressions as the scalar ops elementwise, so a batched run
# reproduces a loop of scalar calls bit for bit. Degenerate rows fall back to
# a = 0 and are reported through the returned mask instead of raising.

def evaluate_batch(rule: BorrowingRule, mu1, mu0, v1, v0):
    """Row-wise rule evaluation. Returns (a, capped_mask, degenerate_mask)."""
    mu1, mu0, v1, v0 = (np.asarray(x, dtype=np.float64) for x in (mu1, mu0, v1, v0))
    delta = mu1 - mu0
    if rule.variant is RuleVariant.MINMSE:
        denom = v1 + (rule.eta * rule.eta) * (delta * delta)
        degenerate = ~(denom > 0.0)
    else:
        denom = np.maximum(delta * delta, v1 + v0) - v0
        degenerate = ~(denom > 0.0)
        if rule.variant is RuleVariant.MAXML:
            degenerate |= ~(v1 > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_raw = np.where(degenerate, 0.0, v0) / np.where(degenerate, 1.0, denom)
    capped = a_raw > rule.cap
    a = np.minimum(a_raw, rule.cap)
    return a, capped, degenerate


def maxml_binomial_batch(y1_sums, n1, y0_sums, n0, grid, cap):
    """Row-wise grid rule on (weighted) counts.

    Returns (a0, a, capped_mask); no degenerate case exists because the grid
    objective is always finite for valid counts.
    """
    _check_grid(np.asarray(grid, dtype=np.float64))
    a0 = _kernels.binom_grid_best_a0(grid, y1_sums, n1, y0_sums, n0)
    if n1 > 0:
        bound = cap * n0 / n1
        capped = a0 > bound
        a0 = np.minimum(a0, bound)
        a_pre = a0 * n1 / n0
        capped |= a_pre > cap
        a = np.minimum(a_pre, cap)
    else:
        capped = np.zeros(a0.shape, dtype=bool)
        a = np.zeros_like(a0)
    return np.minimum(a0, 1.0), a, capped
