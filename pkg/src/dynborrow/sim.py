"""Data generators and the Monte-Carlo scenario runner: variance, MSE, and
95%-interval coverage of the combined estimators across mean-shift grids,
sample sizes, caps, and outcome families.

Determinism: each simulation replicate i uses sub-streams spawned from
(seed, i); data are drawn before any bootstrap seed is derived, and the two
sources are generated internal first, external second. Replicates can run
on several threads (DYNBORROW_WORKERS) with results identical to the
sequential order because every replicate writes its own slot.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from .bboot import IntervalMethod, interval, plugin_estimate, run_many
from .core import ControlSample, DynborrowError, InvalidConfig, OutcomeKind
from .rules import BorrowingRule

_OUTCOMES = ("normal", "binary", "student_t")
_ORACLE_SEED = 20260823     # fixed stream for the binary true-mean oracle
_ORACLE_DRAWS = 10_000_000
_oracle_cache: dict = {}


def gen_normal(n: int, delta: float, p: int, beta: float, rng,
               source_label: str = "internal") -> ControlSample:
    """Normal outcomes: Y = X'beta + delta*1{external} + N(0, 1), covariates
    i.i.d. standard normal (kept for IPW use); p = 0 gives pure N(shift, 1)."""
    x = rng.standard_normal((n, p)) if p > 0 else None
    shift = delta if source_label == "external" else 0.0
    lin = x @ np.full(p, float(beta)) if p > 0 else 0.0
    y = lin + shift + rng.standard_normal(n)
    return ControlSample(outcomes=y, kind=OutcomeKind.CONTINUOUS,
                         covariates=x, source_label=source_label)


def gen_binary(n: int, delta: float, p0: float, p: int, beta: float, rng,
               source_label: str = "internal") -> ControlSample:
    """Binary outcomes with success probability 1/(1 + exp(X'beta - p_j)),
    p_j = logit(p0 + delta*1{external}); at beta = 0 the success rate is
    exactly p0 (internal) or p0 + delta (external)."""
    base = p0 + (delta if source_label == "external" else 0.0)
    if not (0.0 < p0 < 1.0 and 0.0 < base < 1.0):
        raise InvalidConfig("need 0 < p0 and 0 < p0 + delta < 1")
    x = rng.standard_normal((n, p)) if p > 0 else None
    lin = x @ np.full(p, float(beta)) if p > 0 else np.zeros(n)
    pj = math.log(base / (1.0 - base))
    probs = expit(pj - lin)
    y = (rng.random(n) < probs).astype(np.float64)
    return ControlSample(outcomes=y, kind=OutcomeKind.BINARY,
                         covariates=x, source_label=source_label)


def gen_student_t(n: int, delta: float, p: int, beta: float, df: float, rng,
                  source_label: str = "internal") -> ControlSample:
    """Heavy-tailed variant: Student-t noise (scale 1) instead of normal;
    df > 2 keeps the variance finite for MSE comparisons."""
    if not df > 2.0:
        raise InvalidConfig("need df > 2")
    x = rng.standard_normal((n, p)) if p > 0 else None
    shift = delta if source_label == "external" else 0.0
    lin = x @ np.full(p, float(beta)) if p > 0 else 0.0
    y = lin + shift + rng.standard_t(df, size=n)
    return ControlSample(outcomes=y, kind=OutcomeKind.CONTINUOUS,
                         covariates=x, source_label=source_label)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    delta is the external mean shift (on the outcome scale for normal and
    Student-t data, on the rate scale for binary). n1 = n0 * n1_multiplier.
    beta defaults to 0.5 for continuous outcomes and 0.2 for binary ones.
    coverage switches the per-replicate bootstrap (nboot draws) on; MSE-only
    scenarios skip it, mirroring the separate budget conventions.
    """

    outcome: str
    n0: int
    nsim: int
    seed: int
    n1_multiplier: int = 1
    delta: float = 0.0
    p: int = 5
    beta: Optional[float] = None
    p0: float = 0.2
    df: float = 3.0
    cap: float = 1.0
    eta: float = 1.0
    rules: Tuple[str, ...] = ("minmse", "maxml")
    nboot: int = 100
    coverage: bool = False

    def __post_init__(self):
        if self.outcome not in _OUTCOMES:
            raise InvalidConfig(f"outcome must be one of {_OUTCOMES}")
        if self.n0 < 2:
            raise InvalidConfig("need n0 >= 2")
        if self.n1_multiplier < 1:
            raise InvalidConfig("need n1_multiplier >= 1")
        if self.nsim < 2:
            raise InvalidConfig("need nsim >= 2")
        if self.nboot < 2:
            raise InvalidConfig("need nboot >= 2")
        if self.p < 0:
            raise InvalidConfig("need p >= 0")
        if self.outcome == "binary" and not (
                0.0 < self.p0 < 1.0 and 0.0 < self.p0 + self.delta < 1.0):
            raise InvalidConfig("binary scenarios need 0 < p0 and 0 < p0 + delta < 1")
        if self.outcome == "student_t" and not self.df > 2.0:
            raise InvalidConfig("need df > 2")
        if self.beta is None:
            object.__setattr__(
                self, "beta", 0.2 if self.outcome == "binary" else 0.5)
        if not self.rules:
            raise InvalidConfig("need at least one rule")
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "seed", int(self.seed))
        # constructing the rule objects validates eta/cap and the names
        self.rule_objects()

    def rule_objects(self):
        return [BorrowingRule.from_name(name, eta=self.eta, cap=self.cap)
                for name in self.rules]

    @property
    def n1(self) -> int:
        return self.n0 * self.n1_multiplier


@dataclass(frozen=True)
class MetricsRow:
    """Aggregated operating characteristics for one (scenario, rule) pair.

    Field order is the CSV column order. Standard errors are Monte-Carlo
    (delta-method for the variance); coverage fields are None for MSE-only
    runs. var_no_borrow is the variance of the plain internal mean across
    replicates, the no-borrowing benchmark.
    """

    outcome: str
    n0: int
    n1: int
    delta: float
    p0: float
    cap: float
    eta: float
    rule: str
    nsim: int
    nboot: int
    coverage: bool
    seed: int
    true_mu0: float
    mean_a: float
    bias: float
    se_bias: float
    variance: float
    se_variance: float
    mse: float
    se_mse: float
    var_no_borrow: float
    coverage_normal: Optional[float] = None
    se_coverage_normal: Optional[float] = None
    coverage_percentile: Optional[float] = None
    se_coverage_percentile: Optional[float] = None
    n_failed: int = 0


def true_mu0(cfg: ScenarioConfig) -> float:
    """Target value for MSE and coverage accounting: the internal control
    mean. 0 for continuous outcomes (covariates are mean zero); for binary
    outcomes p0 exactly when beta*p = 0, otherwise a cached 1e7-draw
    Monte-Carlo oracle of E[expit(logit(p0) - X'beta)] under a fixed seed."""
    if cfg.outcome != "binary":
        return 0.0
    if cfg.beta == 0.0 or cfg.p == 0:
        return cfg.p0
    key = (cfg.p0, cfg.beta, cfg.p)
    if key not in _oracle_cache:
        rng = np.random.default_rng(_ORACLE_SEED)
        sd = abs(cfg.beta) * math.sqrt(cfg.p)
        logit_p0 = math.log(cfg.p0 / (1.0 - cfg.p0))
        total = 0.0
        chunk = 1_000_000
        for _ in range(_ORACLE_DRAWS // chunk):
            z = rng.standard_normal(chunk) * sd
            total += float(expit(logit_p0 - z).sum())
        _oracle_cache[key] = total / _ORACLE_DRAWS
    return _oracle_cache[key]


def _generate(cfg: ScenarioConfig, rng, source_label: str) -> ControlSample:
    n = cfg.n0 if source_label == "internal" else cfg.n1
    if cfg.outcome == "normal":
        return gen_normal(n, cfg.delta, cfg.p, cfg.beta, rng, source_label)
    if cfg.outcome == "binary":
        return gen_binary(n, cfg.delta, cfg.p0, cfg.p, cfg.beta, rng, source_label)
    return gen_student_t(n, cfg.delta, cfg.p, cfg.beta, cfg.df, rng, source_label)


def _workers() -> int:
    raw = os.environ.get("DYNBORROW_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_scenario(cfg: ScenarioConfig):
    """Run one scenario; returns a list of MetricsRow, one per rule.

    Per replicate: generate both sources, record each rule's plug-in point
    estimate and selected a; when coverage is on, run the shared-draw
    bootstrap once (all rules on identical weights) and score both interval
    types against the true mean. Replicate failures are counted, not fatal.
    Aggregation reads per-replicate slots in index order, so thread count
    does not affect results.
    """
    rules = cfg.rule_objects()
    nrules = len(rules)
    truth = true_mu0(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.nsim)

    est = np.full((nrules, cfg.nsim), np.nan)
    a_sel = np.full((nrules, cfg.nsim), np.nan)
    cov_n = np.zeros((nrules, cfg.nsim), dtype=bool)
    cov_p = np.zeros((nrules, cfg.nsim), dtype=bool)
    mu0_hat = np.full(cfg.nsim, np.nan)
    failed = np.zeros(cfg.nsim, dtype=bool)

    def one(i: int) -> None:
        k_data, k_boot = children[i].spawn(2)
        rng = np.random.default_rng(k_data)
        try:
            d0 = _generate(cfg, rng, "internal")
            d1 = _generate(cfg, rng, "external")
            mu0_hat[i] = d0.outcomes.mean()
            draws = None
            if cfg.coverage:
                bseed = int(k_boot.generate_state(1, np.uint64)[0])
                draws = run_many(d0, d1, rules, cfg.nboot, bseed)
            for r, rule in enumerate(rules):
                point, amount, _ = plugin_estimate(d0, d1, rule)
                est[r, i] = point
                a_sel[r, i] = amount.a
                if draws is not None:
                    iv_n = interval(draws[r].mu_c, draws[r].point,
                                    IntervalMethod.NORMAL_APPROX)
                    iv_p = interval(draws[r].mu_c, draws[r].point,
                                    IntervalMethod.PERCENTILE)
                    cov_n[r, i] = iv_n.lower <= truth <= iv_n.upper
                    cov_p[r, i] = iv_p.lower <= truth <= iv_p.upper
        except DynborrowError:
            failed[i] = True

    workers = _workers()
    if workers == 1:
        for i in range(cfg.nsim):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(cfg.nsim)))

    ok = ~failed
    m = int(ok.sum())
    if m < 2:
        raise DynborrowError(f"only {m} of {cfg.nsim} replicates succeeded")
    var_nb = float(mu0_hat[ok].var(ddof=1))
    rows = []
    for r, rule in enumerate(rules):
        e = est[r, ok]
        err = e - truth
        sq = err * err
        centered = (e - e.mean()) ** 2
        row = dict(
            outcome=cfg.outcome, n0=cfg.n0, n1=cfg.n1, delta=cfg.delta,
            p0=cfg.p0, cap=cfg.cap, eta=cfg.eta, rule=cfg.rules[r],
            nsim=cfg.nsim, nboot=cfg.nboot, coverage=cfg.coverage,
            seed=cfg.seed, true_mu0=truth,
            mean_a=float(a_sel[r, ok].mean()),
            bias=float(err.mean()),
            se_bias=float(err.std(ddof=1) / math.sqrt(m)),
            variance=float(e.var(ddof=1)),
            se_variance=float(centered.std(ddof=1) / math.sqrt(m)),
            mse=float(sq.mean()),
            se_mse=float(sq.std(ddof=1) / math.sqrt(m)),
            var_no_borrow=var_nb,
            n_failed=int(cfg.nsim - m),
        )
        if cfg.coverage:
            for name, cov in (("normal", cov_n), ("percentile", cov_p)):
                rate = float(cov[r, ok].mean())
                row[f"coverage_{name}"] = rate
                row[f"se_coverage_{name}"] = math.sqrt(rate * (1.0 - rate) / m)
        rows.append(MetricsRow(**row))
    return rows
