import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gape.exceptions import DivergenceError, InputError, UndefinedMeasureError
from gape.valuation import (GordonInputs, ValuationInputs, cumulative_earnings, ga_pe,
                            gordon_fair_pe, n_star, payback_proportion, peg_payback_period,
                            peg_ratio, solvency_bound)

from oracles import bisect_payback, discounted_dividends, summed_earnings, whole_year_payback

# Cumulative columns of the two-stock earnings schedule (P/E 10 at 10%, P/E 20 at 20%).
SCHEDULE = {
    0.10: [1.10, 2.31, 3.64, 5.11, 6.72, 8.49, 10.44, 12.58, 14.94],
    0.20: [1.20, 2.64, 4.37, 6.44, 8.93, 11.92, 15.50, 19.80, 24.96],
}

pe_values = st.floats(1.0, 100.0)


def finite_growth(pe):
    bound = -1.0 / (pe + 1.0)
    return st.floats(bound + 1e-6, 2.0)


def vi(price, eps, growth):
    return ValuationInputs(price, eps, growth)


class TestInputs:
    @pytest.mark.parametrize("price, eps, growth", [
        (0.0, 1.0, 0.1), (-1.0, 1.0, 0.1), (10.0, 0.0, 0.1), (10.0, -2.0, 0.1),
        (10.0, 1.0, -1.0), (math.inf, 1.0, 0.1), (10.0, math.nan, 0.1),
    ])
    def test_rejects_outside_domain(self, price, eps, growth):
        with pytest.raises(InputError):
            vi(price, eps, growth)

    def test_pe(self):
        assert vi(15, 2, 0).pe == 7.5


class TestCumulativeEarnings:
    @pytest.mark.parametrize("growth", sorted(SCHEDULE))
    def test_schedule_cells(self, growth):
        for year, cell in enumerate(SCHEDULE[growth], start=1):
            assert round(cumulative_earnings(1.0, growth, year), 2) == pytest.approx(cell, abs=0.005)

    def test_seven_years_at_ten_percent(self):
        assert cumulative_earnings(1.0, 0.10, 7) == pytest.approx(10.435888100000003, rel=1e-13)

    def test_zero_growth(self):
        assert cumulative_earnings(1.0, 0.0, 7) == 7.0

    @given(eps=st.floats(0.01, 50), growth=st.floats(-0.9, 1.5), years=st.integers(1, 40))
    def test_matches_summation(self, eps, growth, years):
        assert cumulative_earnings(eps, growth, years) == pytest.approx(
            summed_earnings(eps, growth, years), rel=1e-9, abs=1e-12)

    def test_rejects_non_positive_years(self):
        with pytest.raises(InputError):
            cumulative_earnings(1.0, 0.1, 0)


class TestSolvencyBound:
    @pytest.mark.parametrize("price, eps, expected", [(15, 1, -0.0625), (1, 1, -0.5), (9, 1, -0.1)])
    def test_examples(self, price, eps, expected):
        assert solvency_bound(price, eps) == expected

    @given(pe_values)
    def test_strictly_inside_unit_interval(self, pe):
        assert -1.0 < solvency_bound(pe, 1.0) < 0.0


class TestGaPe:
    def test_ten_percent_example(self):
        out = ga_pe(vi(10, 1, 0.10))
        assert out.finite
        assert out.n == pytest.approx(6.784450163168302, rel=1e-12)
        assert round(out.n, 4) == 6.7845

    def test_zero_growth_is_pe(self):
        assert ga_pe(vi(20, 1, 0)).n == 20.0

    def test_contracting_example_is_infinite(self):
        out = ga_pe(vi(10, 1, -0.20))
        assert not out.finite
        assert out.payback_proportion == pytest.approx(0.4, rel=1e-15)

    @pytest.mark.parametrize("pe", [1.0, 10.0, 100.0])
    @pytest.mark.parametrize("g", [1e-10, -1e-10])
    def test_continuity_at_zero_growth(self, pe, g):
        assert abs(ga_pe(vi(pe, 1.0, g)).n - pe) < 1e-6

    @settings(max_examples=300)
    @given(pe=pe_values, data=st.data())
    def test_payback_consistency(self, pe, data):
        g = data.draw(finite_growth(pe))
        n = ga_pe(vi(pe, 1.0, g)).n
        assert abs(cumulative_earnings(1.0, g, n) - pe) < 1e-9 * pe

    @settings(max_examples=300)
    @given(pe=pe_values, data=st.data())
    def test_matches_bisection(self, pe, data):
        g = data.draw(finite_growth(pe))
        assume(abs(g) >= 1e-9)
        assert ga_pe(vi(pe, 1.0, g)).n == pytest.approx(bisect_payback(pe, 1.0, g), rel=1e-9)

    @settings(max_examples=300)
    @given(pe=pe_values, data=st.data())
    def test_ceiling_law(self, pe, data):
        g = data.draw(finite_growth(pe))
        n = ga_pe(vi(pe, 1.0, g)).n
        assume(n != math.floor(n))
        assert peg_payback_period(vi(pe, 1.0, g)) == math.ceil(n) == whole_year_payback(pe, 1.0, g)

    @given(pe=pe_values, g1=st.floats(-0.009, 2.0), g2=st.floats(-0.009, 2.0))
    def test_decreasing_in_growth(self, pe, g1, g2):
        assume(abs(g1 - g2) > 1e-6)
        lo, hi = sorted((g1, g2))
        assert ga_pe(vi(pe, 1.0, lo)).n > ga_pe(vi(pe, 1.0, hi)).n

    @given(g=st.floats(-0.009, 2.0), pe1=pe_values, pe2=pe_values)
    def test_increasing_in_pe(self, g, pe1, pe2):
        assume(abs(pe1 - pe2) > 1e-6)
        lo, hi = sorted((pe1, pe2))
        assert ga_pe(vi(lo, 1.0, g)).n < ga_pe(vi(hi, 1.0, g)).n

    @given(price=st.floats(0.5, 500), eps=st.floats(0.05, 20), g=st.floats(-0.5, 1.5),
           c=st.floats(0.01, 100))
    def test_scale_invariance(self, price, eps, g, c):
        a, b = ga_pe(vi(price, eps, g)), ga_pe(vi(c * price, c * eps, g))
        assert a.finite == b.finite
        if a.finite:
            assert b.n == pytest.approx(a.n, rel=1e-9)
        else:
            assert b.payback_proportion == pytest.approx(a.payback_proportion, rel=1e-9)

    @pytest.mark.parametrize("price, eps", [(15.0, 1.0), (10.0, 1.0), (3.0, 2.0), (99.0, 1.0)])
    def test_diverges_approaching_bound(self, price, eps):
        bound = solvency_bound(price, eps)
        ns = [ga_pe(vi(price, eps, bound + eps_)).n for eps_ in (1e-2, 1e-3, 1e-4, 1e-6, 1e-8)]
        assert all(a < b for a, b in zip(ns, ns[1:]))
        assert ns[-1] - ns[0] > 10

    @pytest.mark.parametrize("price, eps", [(15.0, 1.0), (10.0, 1.0), (3.0, 2.0), (99.0, 1.0)])
    def test_flips_at_bound(self, price, eps):
        bound = solvency_bound(price, eps)
        assert ga_pe(vi(price, eps, bound + 1e-12)).finite
        assert not ga_pe(vi(price, eps, bound)).finite
        assert not ga_pe(vi(price, eps, bound - 1e-12)).finite


class TestPaybackProportion:
    @pytest.mark.parametrize("price, g, expected", [(10, -0.20, 0.4), (4, -0.20, 1.0),
                                                    (16, -0.25, 0.1875)])
    def test_examples(self, price, g, expected):
        assert payback_proportion(vi(price, 1, g)) == pytest.approx(expected, rel=1e-15)

    def test_rejects_finite_region(self):
        with pytest.raises(InputError):
            payback_proportion(vi(10, 1, -0.05))

    @given(pe=pe_values, data=st.data())
    def test_in_unit_interval(self, pe, data):
        bound = solvency_bound(pe, 1.0)
        g = data.draw(st.floats(-0.99, bound))
        assert 0.0 < payback_proportion(vi(pe, 1.0, g)) <= 1.0


class TestNStar:
    @pytest.mark.parametrize("price, g, n_max, expected", [
        (10, -0.20, 50, 52.5), (4, -0.20, 0, 1.0), (16, -0.25, 30, 30 + 16 / 3)])
    def test_examples(self, price, g, n_max, expected):
        assert n_star(vi(price, 1, g), n_max) == pytest.approx(expected, rel=1e-14)

    @given(pe=pe_values, n_max=st.floats(0, 1000), data=st.data())
    def test_exceeds_n_max(self, pe, n_max, data):
        g = data.draw(st.floats(-0.99, solvency_bound(pe, 1.0)))
        assert n_star(vi(pe, 1.0, g), n_max) > n_max

    def test_rank_key_matches(self):
        inputs = vi(10, 1, -0.2)
        assert ga_pe(inputs).rank_key(50.0) == n_star(inputs, 50.0)


class TestPeg:
    @pytest.mark.parametrize("pe, pct, expected", [(10, 10, 1.0), (20, 20, 1.0), (15, 30, 0.5)])
    def test_ratio(self, pe, pct, expected):
        assert peg_ratio(pe, pct) == expected

    @pytest.mark.parametrize("pct", [0.0, -5.0])
    def test_ratio_undefined(self, pct):
        with pytest.raises(UndefinedMeasureError):
            peg_ratio(10, pct)

    @pytest.mark.parametrize("price, g, years", [(10, 0.10, 7), (20, 0.20, 9)])
    def test_payback_from_schedule(self, price, g, years):
        assert peg_payback_period(vi(price, 1, g)) == years

    def test_payback_infinite(self):
        assert peg_payback_period(vi(10, 1, -0.20)) == math.inf

    def test_payback_on_integer_root(self):
        # zero growth with P/E 7 pays back exactly at year 7
        assert peg_payback_period(vi(7, 1, 0)) == 7


class TestGordon:
    @pytest.mark.parametrize("payout, r, g", [(0.6, 0.12, 0.0), (0.5, 0.10, 0.05),
                                              (1.0, 0.05, 0.049)])
    def test_matches_discounted_sum(self, payout, r, g):
        value = gordon_fair_pe(GordonInputs(payout, r, g))
        assert value == pytest.approx(discounted_dividends(payout, r, g), rel=1e-9)

    @pytest.mark.parametrize("payout, r, g, expected", [(0.6, 0.12, 0.0, 5.0), (0.5, 0.10, 0.05, 10.5),
                                                        (1.0, 0.05, 0.049, 1049.0)])
    def test_examples(self, payout, r, g, expected):
        assert gordon_fair_pe(GordonInputs(payout, r, g)) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("r, g", [(0.05, 0.05), (0.05, 0.08)])
    def test_diverges(self, r, g):
        with pytest.raises(DivergenceError):
            gordon_fair_pe(GordonInputs(0.5, r, g))

    @pytest.mark.parametrize("payout", [0.0, 1.2])
    def test_payout_domain(self, payout):
        with pytest.raises(InputError):
            GordonInputs(payout, 0.1, 0.0)

    @given(p1=st.floats(0.01, 1), p2=st.floats(0.01, 1), r=st.floats(0.02, 0.3),
           g1=st.floats(-0.5, 0.3), g2=st.floats(-0.5, 0.3))
    def test_partial_orders(self, p1, p2, r, g1, g2):
        assume(g1 < r - 1e-3 and g2 < r - 1e-3)
        f = lambda p, rr, g: gordon_fair_pe(GordonInputs(p, rr, g))
        if p1 < p2 - 1e-9:
            assert f(p1, r, g1) < f(p2, r, g1)
        if g1 < g2 - 1e-9:
            assert f(p1, r, g1) < f(p1, r, g2)
        g = min(g1, g2)
        assert f(p1, r, g) > f(p1, r + 0.01, g)
