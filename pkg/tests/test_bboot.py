import numpy as np
import pytest

from dynborrow import (
    BootstrapConfig,
    BorrowingRule,
    ControlSample,
    DegenerateVarianceWarning,
    IntervalMethod,
    InvalidConfig,
    OutcomeKind,
    bb_replicate,
    dirichlet_weights,
    interval,
    plugin_estimate,
    run,
    run_many,
    summarize,
)
from dynborrow.bboot import _replicate_rngs

# honest large-n limit of E[a*] under equal means for the minMSE rule with
# n1 = n0: a* -> 1/(1 + 2 Z^2) with Z standard normal, whose mean is
# (sqrt(pi)/2) * exp(1/4) * erfc(1/2)
LIMIT_EQUAL_MEANS = 0.545641360765047


def _cont(values, label="internal"):
    return ControlSample(outcomes=np.asarray(values, dtype=float),
                         source_label=label)


def _pair(seed=0, n0=40, n1=120, shift=0.2):
    rng = np.random.default_rng(seed)
    d0 = _cont(rng.normal(0.0, 1.5, n0))
    d1 = _cont(rng.normal(shift, 1.5, n1), label="external")
    return d0, d1


class TestDirichletWeights:
    def test_single_subject(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            assert dirichlet_weights(1, rng).tolist() == [1.0]

    def test_sum_is_n(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            w = dirichlet_weights(50, rng)
            assert w.sum() == pytest.approx(50.0, abs=1e-9)
            assert np.all(w > 0.0)

    def test_moments(self):
        rng = np.random.default_rng(2)
        w = dirichlet_weights(100_000, rng)
        assert w.mean() == pytest.approx(1.0, rel=1e-12)
        assert w.var() == pytest.approx(1.0, abs=0.02)

    def test_invalid_n(self):
        with pytest.raises(InvalidConfig):
            dirichlet_weights(0, np.random.default_rng(0))


class TestDeterminism:
    def test_rerun_identical(self):
        d0, d1 = _pair()
        cfg = BootstrapConfig(B=64, seed=7, rule=BorrowingRule.from_name("minmse"))
        a = run(d0, d1, cfg)
        b = run(d0, d1, cfg)
        np.testing.assert_array_equal(a.mu_c, b.mu_c)
        np.testing.assert_array_equal(a.a_star, b.a_star)
        assert a.point == b.point

    def test_seed_changes_draws(self):
        d0, d1 = _pair()
        rule = BorrowingRule.from_name("minmse")
        a = run(d0, d1, BootstrapConfig(B=16, seed=1, rule=rule))
        b = run(d0, d1, BootstrapConfig(B=16, seed=2, rule=rule))
        assert not np.array_equal(a.mu_c, b.mu_c)

    @pytest.mark.parametrize("name", ["minmse", "maxml", "cminmse"])
    def test_engine_matches_replicate_loop(self, name):
        d0, d1 = _pair(seed=3)
        rule = BorrowingRule.from_name(name)
        batched = run(d0, d1, BootstrapConfig(B=32, seed=11, rule=rule))
        rngs = _replicate_rngs(11, 32)
        for b in range(32):
            mu, a = bb_replicate(d0, d1, rule, rng=rngs[b])
            assert mu == batched.mu_c[b]
            assert a == batched.a_star[b]

    def test_engine_matches_replicate_loop_binary(self):
        rng = np.random.default_rng(4)
        d0 = ControlSample((rng.random(30) < 0.25).astype(float),
                           kind=OutcomeKind.BINARY)
        d1 = ControlSample((rng.random(90) < 0.3).astype(float),
                           kind=OutcomeKind.BINARY, source_label="external")
        rule = BorrowingRule.from_name("maxml")
        batched = run(d0, d1, BootstrapConfig(B=24, seed=5, rule=rule))
        rngs = _replicate_rngs(5, 24)
        for b in range(24):
            mu, a = bb_replicate(d0, d1, rule, rng=rngs[b])
            assert mu == batched.mu_c[b]
            assert a == batched.a_star[b]

    def test_engine_matches_replicate_loop_ipw(self):
        rng = np.random.default_rng(6)
        d0 = ControlSample(rng.normal(0, 1, 25), covariates=rng.normal(0, 1, (25, 2)))
        d1 = ControlSample(rng.normal(0.2, 1, 60),
                           covariates=rng.normal(0.3, 1, (60, 2)),
                           source_label="external")
        rule = BorrowingRule.from_name("minmse")
        batched = run(d0, d1, BootstrapConfig(B=12, seed=9, rule=rule,
                                              use_ipw=True))
        rngs = _replicate_rngs(9, 12)
        for b in range(12):
            mu, a = bb_replicate(d0, d1, rule, ipw_ctx=True, rng=rngs[b])
            assert mu == batched.mu_c[b]
            assert a == batched.a_star[b]

    def test_scale_equivariance_exact(self):
        d0, d1 = _pair(seed=8)
        rule = BorrowingRule.from_name("minmse")
        cfg = BootstrapConfig(B=48, seed=13, rule=rule)
        base = run(d0, d1, cfg)
        doubled = run(_cont(d0.outcomes * 2.0),
                      _cont(d1.outcomes * 2.0, label="external"), cfg)
        np.testing.assert_array_equal(doubled.mu_c, 2.0 * base.mu_c)
        np.testing.assert_array_equal(doubled.a_star, base.a_star)


class TestEngineBehavior:
    def test_no_borrowing_recovers_internal_mean(self):
        d0, d1 = _pair(seed=10, shift=5.0)
        draws = run(d0, d1, BootstrapConfig(B=2000, seed=21, rule=None))
        assert np.all(draws.a_star == 0.0)
        assert draws.capped_fraction == 0.0
        assert draws.point == d0.outcomes.mean()
        mc_se = draws.mu_c.std(ddof=1) / np.sqrt(draws.b)
        assert abs(draws.mu_c.mean() - d0.outcomes.mean()) <= 3.0 * mc_se

    def test_identical_sources_borrow_heavily(self):
        rng = np.random.default_rng(12)
        y = rng.normal(0.0, 1.0, 500)
        d0 = _cont(y)
        d1 = _cont(y.copy(), label="external")
        rule = BorrowingRule.from_name("minmse", cap=1.0)
        draws = run(d0, d1, BootstrapConfig(B=300, seed=17, rule=rule))
        assert np.all((draws.a_star >= 0.0) & (draws.a_star <= 1.0))
        assert draws.a_star.mean() > 0.2
        assert np.all(draws.mu_c >= y.min()) and np.all(draws.mu_c <= y.max())

    def test_plugin_limit_under_equal_means(self):
        # mean over datasets of the plug-in minMSE weight approaches the
        # documented 1/(1+2Z^2) limit mean, not 1/3
        rng = np.random.default_rng(14)
        n = 2000
        rule = BorrowingRule.from_name("minmse", cap=1e9)  # effectively uncapped
        vals = []
        for _ in range(300):
            d0 = _cont(rng.normal(0.0, 1.0, n))
            d1 = _cont(rng.normal(0.0, 1.0, n), label="external")
            _, amount, _ = plugin_estimate(d0, d1, rule)
            vals.append(amount.a)
        mean_a = float(np.mean(vals))
        mc_se = float(np.std(vals, ddof=1)) / np.sqrt(len(vals))
        assert abs(mean_a - LIMIT_EQUAL_MEANS) <= 4.5 * mc_se

    def test_plugin_vanishes_under_shift(self):
        rng = np.random.default_rng(15)
        n = 10_000
        d0 = _cont(rng.normal(0.0, 1.0, n))
        d1 = _cont(rng.normal(0.5, 1.0, n), label="external")
        for name in ("minmse", "maxml", "cminmse"):
            _, amount, _ = plugin_estimate(d0, d1, BorrowingRule.from_name(name))
            assert amount.a < 0.02

    def test_shared_draws_multi_rule(self):
        d0, d1 = _pair(seed=16)
        rules = [None, BorrowingRule.from_name("minmse"),
                 BorrowingRule.from_name("maxml")]
        out = run_many(d0, d1, rules, 40, 23)
        assert len(out) == 3
        assert np.all(out[0].a_star == 0.0)
        lone = run(d0, d1, BootstrapConfig(B=40, seed=23,
                                           rule=BorrowingRule.from_name("minmse")))
        np.testing.assert_array_equal(out[1].mu_c, lone.mu_c)

    def test_treated_arm_tau(self):
        rng = np.random.default_rng(18)
        d0, d1 = _pair(seed=18)
        dt = _cont(rng.normal(1.0, 1.0, 35), label="treated")
        draws = run(d0, d1,
                    BootstrapConfig(B=50, seed=29,
                                    rule=BorrowingRule.from_name("minmse")),
                    dt=dt)
        assert draws.tau is not None and draws.tau.shape == draws.mu_c.shape
        assert draws.tau_point == pytest.approx(
            summarize(dt).mean - draws.point, rel=1e-12)

    def test_mixed_kinds_rejected(self):
        d0, _ = _pair()
        d1 = ControlSample(np.array([0.0, 1.0, 1.0]), kind=OutcomeKind.BINARY,
                           source_label="external")
        with pytest.raises(InvalidConfig):
            run(d0, d1, BootstrapConfig(B=4, seed=1, rule=None))

    def test_ipw_requires_covariates(self):
        d0, d1 = _pair()
        with pytest.raises(InvalidConfig):
            run(d0, d1, BootstrapConfig(B=4, seed=1, rule=None, use_ipw=True))

    def test_degenerate_replicas_warn_and_fall_back(self):
        d0 = _cont([1.0, 1.0, 1.0])
        d1 = _cont([1.0, 1.0, 1.0], label="external")
        rule = BorrowingRule.from_name("minmse")
        with pytest.warns(DegenerateVarianceWarning):
            draws = run(d0, d1, BootstrapConfig(B=8, seed=3, rule=rule))
        # roundoff in the weighted means can leave a replicate with a tiny
        # nonzero denominator, so the count is >= 1 rather than exactly B
        assert draws.degenerate_count >= 1
        assert np.count_nonzero(draws.a_star == 0.0) >= draws.degenerate_count
        assert np.all(draws.a_star <= 1.0)
        assert np.allclose(draws.mu_c, 1.0, atol=1e-12)

    def test_binary_grid_propagates(self):
        rng = np.random.default_rng(19)
        d0 = ControlSample((rng.random(40) < 0.3).astype(float),
                           kind=OutcomeKind.BINARY)
        d1 = ControlSample((rng.random(40) < 0.3).astype(float),
                           kind=OutcomeKind.BINARY, source_label="external")
        rule = BorrowingRule.from_name("maxml")
        draws = run(d0, d1, BootstrapConfig(B=16, seed=7, rule=rule),
                    grid=[0.0])
        assert np.all(draws.a_star == 0.0)
        # a0 = 0 -> conjugate posterior mean of the internal data alone
        assert np.all((draws.mu_c > 0.0) & (draws.mu_c < 1.0))

    def test_config_validation(self):
        with pytest.raises(InvalidConfig):
            BootstrapConfig(B=1, seed=0)
        assert BootstrapConfig(B=2, seed=np.int64(5)).seed == 5


class TestIntervals:
    def test_constant_draws_collapse(self):
        draws = np.full(10, 2.5)
        for method in (IntervalMethod.NORMAL_APPROX, IntervalMethod.PERCENTILE):
            iv = interval(draws, 2.5, method)
            assert (iv.lower, iv.upper) == (2.5, 2.5)
            assert iv.collapsed

    def test_percentile_linear_interpolation(self):
        draws = np.arange(1.0, 101.0)
        iv = interval(draws, 50.0, IntervalMethod.PERCENTILE, 0.95)
        assert iv.lower == pytest.approx(3.475, rel=1e-12)
        assert iv.upper == pytest.approx(97.525, rel=1e-12)

    def test_normal_quantile(self):
        rng = np.random.default_rng(20)
        draws = rng.normal(size=400)
        draws = (draws - draws.mean()) / draws.std(ddof=1)
        iv = interval(draws, 0.0, IntervalMethod.NORMAL_APPROX, 0.95)
        assert iv.upper == pytest.approx(1.959963984540054, rel=1e-9)
        assert iv.lower == pytest.approx(-iv.upper, rel=1e-9)

    def test_method_accepts_string(self):
        draws = np.arange(1.0, 101.0)
        a = interval(draws, 50.0, "percentile")
        b = interval(draws, 50.0, IntervalMethod.PERCENTILE)
        assert (a.lower, a.upper) == (b.lower, b.upper)

    def test_centering_at_point_estimate(self):
        draws = np.array([0.0, 1.0, 2.0])
        iv = interval(draws, 10.0, IntervalMethod.NORMAL_APPROX, 0.95)
        assert iv.lower == pytest.approx(10.0 - 1.959963984540054, rel=1e-12)

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            interval(np.array([1.0]), 1.0, IntervalMethod.PERCENTILE)
        with pytest.raises(InvalidConfig):
            interval(np.arange(5.0), 1.0, IntervalMethod.PERCENTILE, level=1.0)
