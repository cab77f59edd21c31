"""Propensity scores by weighted logistic regression, IPW weights for the
external sample, and covariate balance diagnostics.

The propensity e(x) is the probability of belonging to the internal source;
external subjects are reweighted by the odds e/(1-e).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import (
    DegenerateWeights,
    InvalidConfig,
    SeparationWarning,
    SingularDesign,
)

_PROB_CLAMP = 1e-10   # fitted-probability clamp inside and after IRLS
_ODDS_CLAMP = 1e-6    # clamp before the odds transform
_TOL = 1e-8
_MAX_ITER = 50


@dataclass(frozen=True)
class PsModel:
    """Fitted propensity model (intercept first in coefficients)."""

    coefficients: np.ndarray
    converged: bool
    iterations: int
    deviance: float

    def predict_proba(self, x) -> np.ndarray:
        """Internal-source probabilities for covariate rows x, clamped away
        from 0 and 1."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.coefficients.size - 1:
            raise InvalidConfig("x must be (n, p) matching the fitted model")
        eta = self.coefficients[0] + x @ self.coefficients[1:]
        return np.clip(expit(eta), _PROB_CLAMP, 1.0 - _PROB_CLAMP)


def _deviance(X, y, w, beta):
    p = np.clip(expit(X @ beta), 1e-12, 1.0 - 1e-12)
    return -2.0 * float(np.sum(w * (y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def fit_ps(x0, x1, case_weights=None) -> PsModel:
    """Weighted logistic regression of 1{source = internal} on covariates.

    x0 holds internal rows, x1 external rows (stacked in that order for the
    case weights). IRLS from zero coefficients with step halving whenever the
    deviance would increase; stops when the largest coefficient change is
    below 1e-8 or after 50 iterations.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.ndim != 2 or x1.ndim != 2 or x0.shape[1] != x1.shape[1]:
        raise InvalidConfig("x0 and x1 must be 2-D with matching column counts")
    n0, p = x0.shape
    n1 = x1.shape[0]
    n = n0 + n1
    X = np.column_stack([np.ones(n), np.vstack([x0, x1])])
    y = np.concatenate([np.ones(n0), np.zeros(n1)])
    if case_weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(case_weights, dtype=np.float64)
        if w.shape != (n,):
            raise InvalidConfig(f"case_weights must have length {n}")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise DegenerateWeights("case_weights must be finite and nonnegative")
        if not w.sum() > 0.0:
            raise DegenerateWeights("case_weights sum to zero")
    if n <= p + 1:
        raise SingularDesign(f"need more than p+1 = {p + 1} observations, got {n}")
    active = X[w > 0.0]
    if np.linalg.matrix_rank(active) < p + 1:
        raise SingularDesign("design matrix is rank deficient "
                             "(constant or duplicate covariate columns)")

    beta = np.zeros(p + 1)
    dev = _deviance(X, y, w, beta)
    converged = False
    iterations = 0
    for iterations in range(1, _MAX_ITER + 1):
        eta = X @ beta
        prob = np.clip(expit(eta), _PROB_CLAMP, 1.0 - _PROB_CLAMP)
        irls_w = w * prob * (1.0 - prob)
        z = eta + (y - prob) / (prob * (1.0 - prob))
        try:
            beta_new = np.linalg.solve(X.T @ (irls_w[:, None] * X), X.T @ (irls_w * z))
        except np.linalg.LinAlgError as exc:
            raise SingularDesign("weighted normal equations are singular") from exc
        dev_new = _deviance(X, y, w, beta_new)
        halvings = 0
        while dev_new > dev + 1e-10 and halvings < 30:
            beta_new = 0.5 * (beta + beta_new)
            dev_new = _deviance(X, y, w, beta_new)
            halvings += 1
        change = float(np.max(np.abs(beta_new - beta)))
        beta, dev = beta_new, dev_new
        if change < _TOL:
            converged = True
            break

    raw = expit(X @ beta)
    if np.any(raw < _PROB_CLAMP) or np.any(raw > 1.0 - _PROB_CLAMP):
        warnings.warn(
            "fitted probabilities at the boundary; possible separation, "
            "probabilities are clamped", SeparationWarning, stacklevel=2)
    return PsModel(coefficients=beta, converged=converged,
                   iterations=iterations, deviance=dev)


def _odds(e: np.ndarray) -> np.ndarray:
    e = np.clip(e, _ODDS_CLAMP, 1.0 - _ODDS_CLAMP)
    return e / (1.0 - e)


def ipw_weights(model: PsModel, x1) -> np.ndarray:
    """Odds weights e/(1-e) for the external rows, normalized to sum n1.

    Probabilities are clamped to [1e-6, 1-1e-6] first, so the transform
    survives separation inside bootstrap replicates.
    """
    w = _odds(model.predict_proba(x1))
    return w * (w.size / w.sum())


@dataclass(frozen=True)
class BalanceTable:
    """Raw and weighted external-minus-internal covariate mean differences."""

    names: tuple
    raw_diff: np.ndarray
    weighted_diff: np.ndarray

    def rows(self):
        return [
            {"covariate": name, "raw_diff": float(raw), "weighted_diff": float(weighted)}
            for name, raw, weighted in zip(self.names, self.raw_diff, self.weighted_diff)
        ]


def balance(x0, x1, weights, names: Optional[Sequence[str]] = None) -> BalanceTable:
    """Covariate balance before and after weighting the external rows.

    raw_diff = mean(x1) - mean(x0) per column; weighted_diff uses the given
    weights for the external means.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.ndim != 2 or x1.ndim != 2 or x0.shape[1] != x1.shape[1]:
        raise InvalidConfig("x0 and x1 must be 2-D with matching column counts")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (x1.shape[0],):
        raise InvalidConfig("weights must have one entry per external row")
    if not w.sum() > 0.0:
        raise DegenerateWeights("weights sum to zero")
    internal_means = x0.mean(axis=0)
    raw = x1.mean(axis=0) - internal_means
    weighted = (w @ x1) / w.sum() - internal_means
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(x0.shape[1]))
    else:
        names = tuple(names)
        if len(names) != x0.shape[1]:
            raise InvalidConfig("one name per covariate column required")
    return BalanceTable(names=names, raw_diff=raw, weighted_diff=weighted)
