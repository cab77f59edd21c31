"""Sample containers, summary statistics, and shared error types.

Everything downstream (rules, posteriors, the bootstrap engine, the
simulation harness) speaks in terms of ControlSample and SummaryStats.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels


class DynborrowError(Exception):
    """Base class for all package errors."""


class DegenerateSample(DynborrowError):
    """Sample too small or containing non-finite values."""


class DegenerateWeights(DynborrowError):
    """Weight vector is unusable (zero total, negative, or non-finite)."""


class DegenerateVariance(DynborrowError):
    """A borrowing rule's denominator is zero; the rule is undefined here."""


class InvalidCounts(DynborrowError):
    """Binomial counts out of range (y < 0, y > n, or n invalid)."""


class InvalidGrid(DynborrowError):
    """Grid for the discount-parameter search is empty or malformed."""


class InvalidWeight(DynborrowError):
    """A combination weight or discount parameter is out of range."""


class InvalidConfig(DynborrowError):
    """A configuration value violates its documented constraints."""


class SingularDesign(DynborrowError):
    """Propensity-model design matrix is rank deficient or too small."""


class DatasetError(DynborrowError):
    """Input table does not conform to the documented dataset layout."""


class SeparationWarning(UserWarning):
    """Propensity fit hit probabilities at the boundary (possible separation)."""


class DegenerateVarianceWarning(UserWarning):
    """Some bootstrap replicates fell back to a = 0 (degenerate variance)."""


class OutcomeKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"

    @classmethod
    def from_string(cls, name: str) -> "OutcomeKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise InvalidConfig(f"unknown outcome kind {name!r}")


_SOURCE_LABELS = ("internal", "external", "treated")


@dataclass(frozen=True)
class ControlSample:
    """Outcomes from one data source, optionally with covariates.

    Parameters
    ----------
    outcomes : array of float, length n >= 2
        Observed outcomes; binary samples must contain only 0 and 1.
    kind : OutcomeKind
    covariates : optional (n, p) array
        Retained for propensity weighting; p >= 1 when present.
    source_label : str
        One of "internal", "external", "treated".
    """

    outcomes: np.ndarray
    kind: OutcomeKind = OutcomeKind.CONTINUOUS
    covariates: Optional[np.ndarray] = None
    source_label: str = "internal"

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=np.float64)
        if y.ndim != 1:
            raise InvalidConfig("outcomes must be a one-dimensional vector")
        if y.size < 2:
            raise DegenerateSample(
                f"need at least 2 observations, got {y.size}")
        if not np.all(np.isfinite(y)):
            raise DegenerateSample("outcomes contain non-finite values")
        if self.kind is OutcomeKind.BINARY and not np.all((y == 0.0) | (y == 1.0)):
            raise InvalidCounts("binary outcomes must contain only 0 and 1")
        object.__setattr__(self, "outcomes", y)
        if self.covariates is not None:
            x = np.asarray(self.covariates, dtype=np.float64)
            if x.ndim != 2 or x.shape[0] != y.size or x.shape[1] < 1:
                raise InvalidConfig(
                    "covariates must be an (n, p) matrix with p >= 1 matching the outcomes")
            if not np.all(np.isfinite(x)):
                raise InvalidConfig("covariates contain non-finite values")
            object.__setattr__(self, "covariates", x)
        if self.source_label not in _SOURCE_LABELS:
            raise InvalidConfig(
                f"source_label must be one of {_SOURCE_LABELS}, got {self.source_label!r}")

    @property
    def n(self) -> int:
        return self.outcomes.size


@dataclass(frozen=True)
class SummaryStats:
    """Sample size, mean estimate, and variance of the mean for one source."""

    n: int
    mean: float
    var_of_mean: float

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("summary requires n >= 1")
        if not np.isfinite(self.mean):
            raise InvalidConfig("summary mean must be finite")
        if not (self.var_of_mean >= 0.0):
            raise InvalidConfig("var_of_mean must be nonnegative")


@dataclass(frozen=True)
class CausalEstimand:
    """Treated mean, (combined) control mean, and their difference."""

    mu_t: float
    mu_c: float
    tau: float

    def __post_init__(self):
        if self.tau != self.mu_t - self.mu_c:
            raise InvalidConfig("tau must equal mu_t - mu_c exactly")

    @classmethod
    def from_means(cls, mu_t: float, mu_c: float) -> "CausalEstimand":
        return cls(mu_t=mu_t, mu_c=mu_c, tau=mu_t - mu_c)


def summarize(sample: ControlSample, weights=None) -> SummaryStats:
    """Weighted (or plain) mean and variance-of-the-mean of a sample.

    Weights are normalized internally to sum to n, so rescaling them by a
    positive constant leaves the result unchanged. The weighted variance uses
    the (n - 1) denominator convention; with equal weights this reduces to the
    usual s^2/n.
    """
    y = sample.outcomes
    n = y.size
    if n < 2:
        raise DegenerateSample("summarize requires n >= 2")
    if weights is None:
        mean = float(y.mean())
        var_of_mean = float(y.var(ddof=1) / n)
        return SummaryStats(n=n, mean=mean, var_of_mean=var_of_mean)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise InvalidConfig(f"weights must have length {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise DegenerateWeights("weights must be finite and nonnegative")
    total = w.sum()
    if not total > 0.0:
        raise DegenerateWeights("weights sum to zero")
    w = w * (n / total)
    mean, var_of_mean = _kernels.weighted_mean_var(y, w[None, :])
    return SummaryStats(n=n, mean=float(mean[0]), var_of_mean=float(var_of_mean[0]))


def _check_counts(y_sum, n) -> None:
    if not (np.isfinite(y_sum) and np.isfinite(n)):
        raise InvalidCounts("counts must be finite")
    if n < 1:
        raise InvalidCounts(f"need n >= 1, got {n}")
    if y_sum < 0 or y_sum > n:
        raise InvalidCounts(f"y_sum must lie in [0, n], got y_sum={y_sum}, n={n}")


def binary_summary_beta(y_sum, n) -> SummaryStats:
    """Beta(y+1, n-y+1) posterior mean and variance for a binary sample.

    mean = (y+1)/(n+2), var_of_mean = (y+1)(n-y+1)/[(n+2)^2 (n+3)].
    The mean is strictly inside (0, 1) for every valid input. Non-integer
    y_sum is accepted (weighted success totals from the bootstrap).
    """
    _check_counts(y_sum, n)
    mean = (y_sum + 1.0) / (n + 2.0)
    var = (y_sum + 1.0) * (n - y_sum + 1.0) / ((n + 2.0) ** 2 * (n + 3.0))
    return SummaryStats(n=int(n), mean=float(mean), var_of_mean=float(var))


def binary_summary_plugin(y_sum, n) -> SummaryStats:
    """Plug-in binary summary: mean y/n, var_of_mean p(1-p)/n.

    The alternative convention to binary_summary_beta; which one a pipeline
    uses is an explicit caller choice.
    """
    _check_counts(y_sum, n)
    p = y_sum / n
    return SummaryStats(n=int(n), mean=float(p), var_of_mean=float(p * (1.0 - p) / n))
