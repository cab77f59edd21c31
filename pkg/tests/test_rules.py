import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynborrow import (
    DEFAULT_GRID,
    BorrowAmount,
    BorrowingRule,
    DegenerateVariance,
    InvalidConfig,
    InvalidCounts,
    InvalidGrid,
    InvalidWeight,
    RuleVariant,
    SummaryStats,
    apply_cap,
    cminmse,
    evaluate,
    evaluate_batch,
    maxml_binomial,
    maxml_normal,
    minmse,
)
from dynborrow.rules import maxml_binomial_batch

import _oracles


def _stats(mean, var, n=100):
    return SummaryStats(n=n, mean=mean, var_of_mean=var)


_lgamma = _oracles.libm_lgamma()


def _brute_grid_a0(y1, n1, y0, n0, grid):
    """Independent log-gamma evaluation of the grid objective; >= keeps the
    largest grid value on ties. Uses the platform lgamma (see _oracles)."""
    def lbeta(a, b):
        return _lgamma(a) + _lgamma(b) - _lgamma(a + b)

    best, arg = -math.inf, grid[0]
    for a0 in grid:
        ll = (lbeta(a0 * y1 + y0 + 1.0, a0 * (n1 - y1) + n0 - y0 + 1.0)
              - lbeta(a0 * y1 + 1.0, a0 * (n1 - y1) + 1.0))
        if ll >= best:
            best, arg = ll, a0
    return arg


class TestApplyCap:
    def test_below_cap(self):
        assert apply_cap(0.4, 0.5) == (0.4, False)

    def test_above_cap(self):
        assert apply_cap(3.0, 1.0) == (1.0, True)

    def test_boundary_not_capped(self):
        assert apply_cap(1.0, 1.0) == (1.0, False)

    def test_invalid(self):
        with pytest.raises(InvalidWeight):
            apply_cap(-0.1, 1.0)
        with pytest.raises(InvalidConfig):
            apply_cap(0.5, 0.0)


class TestMaxmlNormal:
    def test_equal_means_full_borrowing(self):
        # power-of-two variances make the closed form exact in floating point
        r = maxml_normal(_stats(0.7, 0.25), _stats(0.7, 0.5))
        assert r.a0 == 1.0
        # general variances land within roundoff of full borrowing
        r = maxml_normal(_stats(0.7, 0.03), _stats(0.7, 0.05))
        assert r.a0 == pytest.approx(1.0, rel=1e-12)

    def test_closed_form_example(self):
        r = maxml_normal(_stats(0.3, 0.01), _stats(0.0, 0.02))
        assert r.a0 == pytest.approx(1 / 7, rel=1e-12)
        assert r.a == pytest.approx(2 / 7, rel=1e-12)
        assert not r.capped

    def test_large_delta_kills_borrowing(self):
        r = maxml_normal(_stats(100.0, 0.01), _stats(0.0, 0.02))
        assert r.a0 < 1e-5
        assert r.a < 1e-4

    def test_zero_external_variance_rejected(self):
        with pytest.raises(DegenerateVariance):
            maxml_normal(_stats(0.3, 0.0), _stats(0.0, 0.02))

    def test_cap_applies_on_a_scale(self):
        r = maxml_normal(_stats(0.0, 0.01), _stats(0.0, 0.05), cap=1.0)
        assert r.capped
        assert r.a == 1.0
        # implied a0 shrinks with the cap: a0 = cap * v1/v0
        assert r.a0 == pytest.approx(0.2)


class TestCminmse:
    def test_trivial_full(self):
        r = cminmse(_stats(0.5, 0.02), _stats(0.5, 0.02))
        assert r.a == 1.0

    def test_closed_form_example(self):
        r = cminmse(_stats(0.3, 0.01), _stats(0.0, 0.02))
        assert r.a == pytest.approx(2 / 7, rel=1e-12)

    def test_matches_maxml_exactly(self):
        rng = np.random.default_rng(20260823)
        worst = 0.0
        for _ in range(2000):
            v0, v1 = rng.uniform(1e-4, 1.0, 2)
            delta = rng.uniform(0.0, 3.0)
            s1, s0 = _stats(delta, v1), _stats(0.0, v0)
            worst = max(worst, abs(cminmse(s1, s0).a - maxml_normal(s1, s0).a))
        assert worst == 0.0  # identical expression, not merely close


class TestMinmse:
    def test_trivial_full(self):
        r = minmse(_stats(0.5, 0.02), _stats(0.5, 0.02), eta=1.0)
        assert r.a == 1.0

    def test_closed_form_example(self):
        r = minmse(_stats(0.3, 0.01), _stats(0.0, 0.02), eta=1.0)
        assert r.a == pytest.approx(0.2, rel=1e-12)

    def test_eta_zero_inverse_variance(self):
        r = minmse(_stats(5.0, 0.01), _stats(0.0, 0.02), eta=0.0)
        assert r.a == pytest.approx(2.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateVariance):
            minmse(_stats(0.0, 0.0), _stats(0.0, 0.02), eta=1.0)

    def test_implied_a0_clamped(self):
        # eta = 0 puts the implied a0 right at 1; the clamp absorbs roundoff
        r = minmse(_stats(0.7, 0.03), _stats(0.0, 0.002), eta=0.0, cap=math.inf)
        assert r.a0 == pytest.approx(1.0, rel=1e-12)
        assert r.a0 <= 1.0

    @settings(max_examples=80, deadline=None)
    @given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0),
           st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_monotone_in_shift(self, v0, v1, d_small, d_extra):
        s0 = _stats(0.0, v0)
        a_small = minmse(_stats(d_small, v1), s0).a
        a_large = minmse(_stats(d_small + d_extra, v1), s0).a
        assert a_large <= a_small + 1e-15


class TestMaxmlBinomial:
    def test_identical_rates_full_borrowing(self):
        r = maxml_binomial(5, 10, 5, 10)
        assert r.a0 == 1.0

    def test_conflicting_rates_no_borrowing(self):
        r = maxml_binomial(0, 50, 50, 50)
        assert r.a0 == 0.0
        assert r.a == 0.0

    def test_single_point_grid(self):
        r = maxml_binomial(30, 100, 8, 40, grid=[0.0])
        assert r.a0 == 0.0

    def test_flat_likelihood_tie_takes_largest(self):
        # n1 = 0 makes every grid point score identically
        r = maxml_binomial(0, 0, 5, 10)
        assert r.a0 == 1.0
        assert r.a == 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n1 = int(rng.integers(1, 150))
            n0 = int(rng.integers(1, 150))
            y1 = int(rng.integers(0, n1 + 1))
            y0 = int(rng.integers(0, n0 + 1))
            got = maxml_binomial(y1, n1, y0, n0).a0
            want = _brute_grid_a0(y1, n1, y0, n0, DEFAULT_GRID)
            assert got == want, (y1, n1, y0, n0)

    def test_cap_on_a_scale(self):
        r = maxml_binomial(5, 10, 5, 10, cap=0.5)
        # uncapped a0 = 1 -> a = n1/n0 = 1 > 0.5
        assert r.capped
        assert r.a == pytest.approx(0.5)
        assert r.a0 == pytest.approx(0.5)

    def test_invalid_counts(self):
        with pytest.raises(InvalidCounts):
            maxml_binomial(5, 10, 5, 0)
        with pytest.raises(InvalidCounts):
            maxml_binomial(11, 10, 5, 10)
        with pytest.raises(InvalidCounts):
            maxml_binomial(5, 10, -1, 10)

    def test_invalid_grid(self):
        with pytest.raises(InvalidGrid):
            maxml_binomial(5, 10, 5, 10, grid=[])
        with pytest.raises(InvalidGrid):
            maxml_binomial(5, 10, 5, 10, grid=[0.5, 0.2])
        with pytest.raises(InvalidGrid):
            maxml_binomial(5, 10, 5, 10, grid=[0.0, 1.5])

    def test_weighted_counts(self):
        r = maxml_binomial(4.75, 10.0, 5.25, 10.0)
        assert 0.0 <= r.a0 <= 1.0


class TestRuleObjects:
    def test_from_name(self):
        for name, variant in (("maxml", RuleVariant.MAXML),
                              ("cminmse", RuleVariant.CMINMSE),
                              ("minmse", RuleVariant.MINMSE)):
            assert BorrowingRule.from_name(name).variant is variant
        with pytest.raises(InvalidConfig):
            BorrowingRule.from_name("bayes")

    def test_parameter_validation(self):
        with pytest.raises(InvalidConfig):
            BorrowingRule(RuleVariant.MINMSE, eta=-1.0)
        with pytest.raises(InvalidConfig):
            BorrowingRule(RuleVariant.MINMSE, cap=0.0)

    def test_borrow_amount_validation(self):
        with pytest.raises(InvalidWeight):
            BorrowAmount(a=-0.5)
        with pytest.raises(InvalidWeight):
            BorrowAmount(a=0.5, a0=1.5)

    def test_evaluate_dispatch(self):
        # cap large enough to never bind for these inputs
        s1, s0 = _stats(0.3, 0.01), _stats(0.0, 0.02)
        assert evaluate(BorrowingRule.from_name("maxml", cap=1e9), s1, s0).a \
            == maxml_normal(s1, s0).a
        assert evaluate(BorrowingRule.from_name("cminmse", cap=1e9), s1, s0).a \
            == cminmse(s1, s0).a
        assert evaluate(BorrowingRule.from_name("minmse", cap=1e9), s1, s0).a \
            == minmse(s1, s0).a


class TestBatchParity:
    """The vectorized forms must reproduce the scalar ops bit for bit."""

    @settings(max_examples=120, deadline=None)
    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
           st.floats(1e-6, 1.0), st.floats(1e-6, 1.0),
           st.sampled_from(["maxml", "cminmse", "minmse"]),
           st.floats(0.1, 2.0))
    def test_singleton_matches_scalar(self, mu1, mu0, v1, v0, name, cap):
        rule = BorrowingRule.from_name(name, eta=1.0, cap=cap)
        a_vec, capped_vec, degen = evaluate_batch(
            rule, [mu1], [mu0], [v1], [v0])
        assert not degen[0]
        scalar = evaluate(rule, _stats(mu1, v1), _stats(mu0, v0))
        assert a_vec[0] == scalar.a
        assert bool(capped_vec[0]) == scalar.capped

    def test_degenerate_rows_masked(self):
        rule = BorrowingRule.from_name("minmse")
        a, capped, degen = evaluate_batch(rule, [0.0, 1.0], [0.0, 0.0],
                                          [0.0, 0.01], [0.02, 0.02])
        assert degen.tolist() == [True, False]
        assert a[0] == 0.0

    def test_binomial_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        n1, n0, cap = 120.0, 60.0, 0.8
        y1 = rng.uniform(0, n1, 50)
        y0 = rng.uniform(0, n0, 50)
        a0_b, a_b, capped_b = maxml_binomial_batch(y1, n1, y0, n0,
                                                   DEFAULT_GRID, cap)
        for i in range(50):
            scalar = maxml_binomial(y1[i], n1, y0[i], n0, cap=cap)
            assert a0_b[i] == scalar.a0
            assert a_b[i] == scalar.a
            assert bool(capped_b[i]) == scalar.capped
