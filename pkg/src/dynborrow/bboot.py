"""Bayesian-bootstrap engine: Dirichlet reweighting, per-replicate rule
evaluation, posterior draws of the combined control mean (and treatment
effect), and interval construction.

Determinism contract: replicate b draws from a sub-stream derived from
(seed, b) via numpy's SeedSequence.spawn, in the documented order internal
weights, external weights, treated weights. Results are therefore identical
whether replicates run sequentially or data-parallel, and the vectorized
engine reproduces a loop of bb_replicate calls bit for bit.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .core import (
    ControlSample,
    DegenerateVariance,
    DegenerateVarianceWarning,
    InvalidConfig,
    OutcomeKind,
    binary_summary_plugin,
    summarize,
)
from .ipw import _odds, fit_ps, ipw_weights
from .posterior import combine
from .rules import (
    DEFAULT_GRID,
    BorrowAmount,
    BorrowingRule,
    RuleVariant,
    evaluate,
    evaluate_batch,
    maxml_binomial,
    maxml_binomial_batch,
)


@dataclass(frozen=True)
class BootstrapConfig:
    """Engine configuration. rule = None disables borrowing (a = 0 in every
    replicate); B >= 300 is recommended for percentile intervals."""

    B: int
    seed: int
    rule: Optional[BorrowingRule] = None
    use_ipw: bool = False

    def __post_init__(self):
        if self.B < 2:
            raise InvalidConfig("need B >= 2 bootstrap replicates")
        object.__setattr__(self, "seed", int(self.seed))


class IntervalMethod(enum.Enum):
    NORMAL_APPROX = "normal"
    PERCENTILE = "percentile"


@dataclass(frozen=True)
class IntervalEstimate:
    method: IntervalMethod
    lower: float
    upper: float
    level: float
    collapsed: bool = False

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise InvalidConfig("interval bounds out of order")


@dataclass(frozen=True)
class PosteriorDraws:
    """B bootstrap draws plus the plug-in point estimate.

    a_star holds the estimator-scale weights actually used (post cap);
    capped_fraction is the share of replicates where the cap was binding and
    degenerate_count the number that fell back to a = 0.
    """

    mu_c: np.ndarray
    a_star: np.ndarray
    tau: Optional[np.ndarray]
    point: float
    tau_point: Optional[float]
    capped_fraction: float
    degenerate_count: int

    def __post_init__(self):
        if self.a_star.shape != self.mu_c.shape or self.mu_c.ndim != 1:
            raise InvalidConfig("draw vectors must share one length")
        if self.tau is not None and self.tau.shape != self.mu_c.shape:
            raise InvalidConfig("draw vectors must share one length")

    @property
    def b(self) -> int:
        return self.mu_c.size

    def summaries(self) -> dict:
        """Mean, sd, and quantiles of each draw vector."""
        out = {}
        vectors = {"mu_c": self.mu_c, "a_star": self.a_star}
        if self.tau is not None:
            vectors["tau"] = self.tau
        for name, vec in vectors.items():
            q = np.quantile(vec, [0.025, 0.25, 0.5, 0.75, 0.975])
            out[name] = {
                "mean": float(vec.mean()),
                "sd": float(vec.std(ddof=1)),
                "q0.025": float(q[0]), "q0.25": float(q[1]), "median": float(q[2]),
                "q0.75": float(q[3]), "q0.975": float(q[4]),
            }
        return out


def dirichlet_weights(n: int, rng) -> np.ndarray:
    """Uniform-Dirichlet weights scaled to sum to n: standard-exponential
    draws divided by their mean."""
    if n < 1:
        raise InvalidConfig("need n >= 1")
    e = rng.standard_exponential(n)
    return e / e.mean()


def _replicate_rngs(seed: int, B: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(B)]


def _row_normalize(w: np.ndarray, n: int) -> np.ndarray:
    # same expression as summarize: w * (n / total), applied per row
    return w * (n / w.sum(axis=1))[:, None]


def _xi_raw(w1: np.ndarray, probs: np.ndarray) -> np.ndarray:
    # external weights become Dirichlet weight times the internal-source odds;
    # the summary step renormalizes them to sum n1
    return w1 * _odds(probs)


def _check_pair(d0: ControlSample, d1: ControlSample) -> None:
    if d0.kind is not d1.kind:
        raise InvalidConfig("samples must share one outcome kind")


def _require_covariates(*samples: ControlSample) -> int:
    ps = set()
    for d in samples:
        if d.covariates is None:
            raise InvalidConfig("IPW requires covariates on both control sources")
        ps.add(d.covariates.shape[1])
    if len(ps) != 1:
        raise InvalidConfig("covariate dimension must match across sources")
    return ps.pop()


def bb_replicate(d0: ControlSample, d1: ControlSample, rule: Optional[BorrowingRule],
                 ipw_ctx=None, rng=None, grid=None):
    """One bootstrap replicate: returns (mu_c_b, a_b).

    Draw order: internal weights first, then external. With ipw_ctx truthy, a
    propensity model is fitted with the replicate's weights as case weights
    and the external weights are tilted by the fitted odds. Degenerate rule
    denominators fall back to a_b = 0.
    """
    _check_pair(d0, d1)
    if rng is None:
        raise InvalidConfig("an rng (numpy Generator) is required")
    w0 = dirichlet_weights(d0.n, rng)
    w1 = dirichlet_weights(d1.n, rng)
    if ipw_ctx:
        _require_covariates(d0, d1)
        model = fit_ps(d0.covariates, d1.covariates,
                       case_weights=np.concatenate([w0, w1]))
        w1 = _xi_raw(w1, model.predict_proba(d1.covariates))
    s0 = summarize(d0, w0)
    s1 = summarize(d1, w1)
    if rule is None:
        return combine(s0.mean, s1.mean, 0.0), 0.0
    if d0.kind is OutcomeKind.BINARY and rule.variant is RuleVariant.MAXML:
        y0w = s0.mean * d0.n
        y1w = s1.mean * d1.n
        amount = maxml_binomial(y1w, d1.n, y0w, d0.n, grid=grid, cap=rule.cap)
        mu = (amount.a0 * y1w + y0w + 1.0) / (d0.n + amount.a0 * d1.n + 2.0)
        return mu, amount.a
    try:
        amount = evaluate(rule, s1, s0)
        a = amount.a
    except DegenerateVariance:
        a = 0.0
    return combine(s0.mean, s1.mean, a), a


def run_many(d0: ControlSample, d1: ControlSample,
             rules: Sequence[Optional[BorrowingRule]], B: int, seed: int,
             dt: Optional[ControlSample] = None, use_ipw: bool = False,
             grid=None):
    """Shared-draw engine: evaluate several rules on one set of weight draws.

    Returns one PosteriorDraws per entry of rules. All rules see identical
    Dirichlet weights (and identical propensity fits when use_ipw), which
    makes between-rule comparisons paired.
    """
    _check_pair(d0, d1)
    if dt is not None and dt.kind is not d0.kind:
        raise InvalidConfig("samples must share one outcome kind")
    if B < 2:
        raise InvalidConfig("need B >= 2 bootstrap replicates")
    if not rules:
        raise InvalidConfig("need at least one rule entry (None = no borrowing)")
    n0, n1 = d0.n, d1.n
    w0 = np.empty((B, n0))
    w1 = np.empty((B, n1))
    wt = np.empty((B, dt.n)) if dt is not None else None
    rngs = _replicate_rngs(int(seed), B)
    for b, rng in enumerate(rngs):
        w0[b] = dirichlet_weights(n0, rng)
        w1[b] = dirichlet_weights(n1, rng)
        if wt is not None:
            wt[b] = dirichlet_weights(dt.n, rng)
    if use_ipw:
        _require_covariates(d0, d1)
        for b in range(B):
            model = fit_ps(d0.covariates, d1.covariates,
                           case_weights=np.concatenate([w0[b], w1[b]]))
            w1[b] = _xi_raw(w1[b], model.predict_proba(d1.covariates))

    mu0v, v0v = _kernels.weighted_mean_var(d0.outcomes, _row_normalize(w0, n0))
    mu1v, v1v = _kernels.weighted_mean_var(d1.outcomes, _row_normalize(w1, n1))
    mutv = None
    if dt is not None:
        mutv, _ = _kernels.weighted_mean_var(dt.outcomes, _row_normalize(wt, dt.n))

    out = []
    for rule in rules:
        degenerate = 0
        if rule is None:
            a = np.zeros(B)
            capped_fraction = 0.0
            mu_c = (mu0v + a * mu1v) / (1.0 + a)
        elif d0.kind is OutcomeKind.BINARY and rule.variant is RuleVariant.MAXML:
            y0w = mu0v * n0
            y1w = mu1v * n1
            a0, a, capped = maxml_binomial_batch(
                y1w, n1, y0w, n0,
                DEFAULT_GRID if grid is None else grid, rule.cap)
            capped_fraction = float(capped.mean())
            mu_c = (a0 * y1w + y0w + 1.0) / (n0 + a0 * n1 + 2.0)
        else:
            a, capped, degenerate_mask = evaluate_batch(rule, mu1v, mu0v, v1v, v0v)
            degenerate = int(degenerate_mask.sum())
            capped_fraction = float(capped.mean())
            mu_c = (mu0v + a * mu1v) / (1.0 + a)
        if degenerate:
            warnings.warn(
                f"{degenerate} of {B} replicates had a degenerate rule "
                "denominator and fell back to a = 0",
                DegenerateVarianceWarning, stacklevel=2)
        point, _, tau_point = plugin_estimate(d0, d1, rule, dt=dt,
                                              use_ipw=use_ipw, grid=grid)
        tau = mutv - mu_c if mutv is not None else None
        out.append(PosteriorDraws(
            mu_c=mu_c, a_star=a, tau=tau, point=point, tau_point=tau_point,
            capped_fraction=capped_fraction, degenerate_count=degenerate))
    return out


def run(d0: ControlSample, d1: ControlSample, cfg: BootstrapConfig,
        dt: Optional[ControlSample] = None, grid=None) -> PosteriorDraws:
    """Full bootstrap run for one rule configuration (Dirichlet reweighting,
    B replicates, plug-in point estimate on the unweighted data)."""
    return run_many(d0, d1, [cfg.rule], cfg.B, cfg.seed, dt=dt,
                    use_ipw=cfg.use_ipw, grid=grid)[0]


def plugin_estimate(d0: ControlSample, d1: ControlSample,
                    rule: Optional[BorrowingRule],
                    dt: Optional[ControlSample] = None,
                    use_ipw: bool = False, grid=None):
    """Point estimate on the unweighted data: (mu_c, BorrowAmount, tau).

    With use_ipw the external mean is the odds-weighted one from a
    full-data propensity fit. Binary data use the conjugate-posterior mean
    for the maxML rule and plug-in p(1-p)/n summaries otherwise; a degenerate
    rule denominator falls back to a = 0 with a warning.
    """
    _check_pair(d0, d1)
    s0 = summarize(d0)
    weights1 = None
    if use_ipw:
        _require_covariates(d0, d1)
        model = fit_ps(d0.covariates, d1.covariates)
        weights1 = ipw_weights(model, d1.covariates)
    s1 = summarize(d1, weights1)
    if rule is None:
        point = combine(s0.mean, s1.mean, 0.0)
        amount = BorrowAmount(a=0.0, a0=0.0, capped=False)
    elif d0.kind is OutcomeKind.BINARY and rule.variant is RuleVariant.MAXML:
        y0w = s0.mean * d0.n
        y1w = s1.mean * d1.n
        amount = maxml_binomial(y1w, d1.n, y0w, d0.n, grid=grid, cap=rule.cap)
        point = (amount.a0 * y1w + y0w + 1.0) / (d0.n + amount.a0 * d1.n + 2.0)
    else:
        if d0.kind is OutcomeKind.BINARY:
            s0 = binary_summary_plugin(s0.mean * d0.n, d0.n)
            s1 = binary_summary_plugin(s1.mean * d1.n, d1.n)
        try:
            amount = evaluate(rule, s1, s0)
        except DegenerateVariance:
            warnings.warn("degenerate rule denominator; point estimate uses a = 0",
                          DegenerateVarianceWarning, stacklevel=2)
            amount = BorrowAmount(a=0.0, a0=None, capped=False)
        point = combine(s0.mean, s1.mean, amount.a)
    tau_point = None
    if dt is not None:
        tau_point = summarize(dt).mean - point
    return point, amount, tau_point


def interval(draws, point: float, method, level: float = 0.95) -> IntervalEstimate:
    """Interval from bootstrap draws.

    NormalApprox centers at the plug-in point estimate (not the draw mean)
    with sd over the draws (denominator B-1); Percentile takes empirical
    quantiles with linear interpolation between order statistics. Zero-spread
    draws collapse the interval to a point, flagged via collapsed.
    """
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim != 1 or draws.size < 2:
        raise InvalidConfig("need at least two draws")
    if not 0.0 < level < 1.0:
        raise InvalidConfig("level must lie in (0, 1)")
    method = IntervalMethod(method) if not isinstance(method, IntervalMethod) else method
    if method is IntervalMethod.NORMAL_APPROX:
        sd = float(draws.std(ddof=1))
        z = NormalDist().inv_cdf((1.0 + level) / 2.0)
        lower, upper = point - z * sd, point + z * sd
        collapsed = sd == 0.0
    else:
        lower, upper = np.quantile(draws, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
        lower, upper = float(lower), float(upper)
        collapsed = lower == upper
    return IntervalEstimate(method=method, lower=lower, upper=upper,
                            level=level, collapsed=collapsed)
