"""Combined estimator, closed-form conditional posteriors, and the analytic
MSE/bias/variance profile used for optimality checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import (
    DegenerateVariance,
    DynborrowError,
    InvalidConfig,
    InvalidCounts,
    InvalidWeight,
    SummaryStats,
)


@dataclass(frozen=True)
class CombinedEstimate:
    """Combined control mean (mu0 + a*mu1)/(1+a) with its ingredients."""

    mu_c: float
    a: float
    components: Tuple[float, float, float, float]  # (mu0, mu1, var0, var1)

    def __post_init__(self):
        mu0, mu1 = self.components[0], self.components[1]
        slack = 1e-9 * (1.0 + abs(mu0) + abs(mu1))
        if not (min(mu0, mu1) - slack <= self.mu_c <= max(mu0, mu1) + slack):
            raise DynborrowError("combined mean escaped the convex hull of the means")


@dataclass(frozen=True)
class MseProfile:
    """Variance, bias, and (eta-weighted) MSE of the combined estimator at a
    given a; mse = variance + eta^2 * bias^2."""

    variance: float
    bias: float
    mse: float


@dataclass(frozen=True)
class BetaParams:
    """Beta posterior for a binomial control mean."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise InvalidConfig("Beta parameters must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))


def combine(mu0: float, mu1: float, a: float) -> float:
    """Linear combination (mu0 + a*mu1)/(1+a); a = 0 returns mu0."""
    if not (np.isfinite(a) and a >= 0.0):
        raise InvalidWeight("a must be finite and >= 0")
    return (mu0 + a * mu1) / (1.0 + a)


def combined_estimate(s1: SummaryStats, s0: SummaryStats, a: float) -> CombinedEstimate:
    """combine() packaged with its components for reporting."""
    mu_c = combine(s0.mean, s1.mean, a)
    return CombinedEstimate(
        mu_c=mu_c, a=a,
        components=(s0.mean, s1.mean, s0.var_of_mean, s1.var_of_mean))


def mse_profile(a, sigma0_sq, sigma1_sq, delta, eta: float = 1.0) -> MseProfile:
    """Analytic profile at weight a.

    variance = (var0 + a^2 var1)/(1+a)^2, bias = a*delta/(1+a),
    mse = (var0 + a^2 (var1 + eta^2 delta^2))/(1+a)^2.
    Accepts scalars or arrays for a (broadcast elementwise).
    """
    if not np.all(np.asarray(a) >= 0.0):
        raise InvalidWeight("a must be >= 0")
    if not (np.all(np.asarray(sigma0_sq) >= 0.0) and np.all(np.asarray(sigma1_sq) >= 0.0)):
        raise InvalidConfig("variances must be >= 0")
    one = 1.0 + a
    denom = one * one
    variance = (sigma0_sq + a * a * sigma1_sq) / denom
    bias = a * delta / one
    mse = (sigma0_sq + a * a * (sigma1_sq + eta * eta * delta * delta)) / denom
    return MseProfile(variance=variance, bias=bias, mse=mse)


def optimal_a(sigma0_sq: float, sigma1_sq: float, delta: float, eta: float = 1.0) -> float:
    """MSE-minimizing weight var0/(var1 + eta^2 delta^2)."""
    denom = sigma1_sq + (eta * eta) * (delta * delta)
    if not denom > 0.0:
        raise DegenerateVariance("var1 + (eta*delta)^2 is zero; no unique optimum")
    return sigma0_sq / denom


def bias_at_optimum(sigma0_sq: float, sigma1_sq: float, delta: float) -> float:
    """Bias of the combined estimator at the optimal weight (eta = 1):
    delta*var0/(var1 + var0 + delta^2). As a function of delta^2 its square
    peaks at delta^2 = var0 + var1 and vanishes as delta grows."""
    denom = sigma1_sq + sigma0_sq + delta * delta
    if not denom > 0.0:
        raise DegenerateVariance("all of var0, var1, delta^2 are zero")
    return delta * sigma0_sq / denom


def posterior_normal(s1: SummaryStats, s0: SummaryStats, a0: float) -> Tuple[float, float]:
    """Normal posterior (mean, variance) of the control mean at discount a0:
    variance = 1/(a0/var1 + 1/var0), mean = variance*(a0*mu1/var1 + mu0/var0)."""
    if not (0.0 <= a0 <= 1.0):
        raise InvalidWeight("a0 must lie in [0, 1]")
    v1, v0 = s1.var_of_mean, s0.var_of_mean
    if not (v1 > 0.0 and v0 > 0.0):
        raise DegenerateVariance("posterior_normal needs positive variances")
    variance = 1.0 / (a0 / v1 + 1.0 / v0)
    mean = variance * (a0 * s1.mean / v1 + s0.mean / v0)
    return mean, variance


def posterior_binomial(y1_sum, n1, y0_sum, n0, a0: float) -> BetaParams:
    """Beta posterior at discount a0 under a flat Beta(1,1) prior:
    Beta(a0*y1 + y0 + 1, n0 + a0*(n1 - y1) - y0 + 1)."""
    if not (0.0 <= a0 <= 1.0):
        raise InvalidWeight("a0 must lie in [0, 1]")
    for y, n, label in ((y1_sum, n1, "y1_sum"), (y0_sum, n0, "y0_sum")):
        if not np.isfinite(y) or y < 0 or y > n or n < 0:
            raise InvalidCounts(f"{label} must lie in [0, n]")
    alpha = a0 * y1_sum + y0_sum + 1.0
    beta = n0 + a0 * (n1 - y1_sum) - y0_sum + 1.0
    return BetaParams(alpha=float(alpha), beta=float(beta))
