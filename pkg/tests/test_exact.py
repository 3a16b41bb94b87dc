import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashcov.exact import (
    FisherResult,
    conditional_mle_odds_ratio,
    fisher_less,
    fisher_pvalue_less,
    format_half_up,
    log_binom,
    log_hypergeom_pmf,
    margin_percentages,
    noncentral_cdf,
    noncentral_mean,
    noncentral_pmf,
    noncentral_pmf_vector,
    percent_half_up,
    summarize_percentages,
    support,
    upper_confidence_bound,
)
from crashcov.table import ContingencyTable

TABLE2 = ContingencyTable(67, 522, 1099, 7835)
TABLE1 = ContingencyTable(1152, 366, 4890, 3115)


def exact_cdf(x, N, K, n, psi=Fraction(1)):
    lo, hi = max(0, n + K - N), min(n, K)
    weights = {k: comb(K, k) * comb(N - K, n - k) * psi**k for k in range(lo, hi + 1)}
    total = sum(weights.values())
    return Fraction(sum(w for k, w in weights.items() if k <= x), total)


def margins(t):
    return t.total, t.col1, t.row1, t.n11


tables = st.tuples(*[st.integers(0, 60)] * 4).map(lambda c: ContingencyTable(*c))


class TestPValue:
    @pytest.mark.parametrize("cells", [(3, 1, 1, 3), (0, 5, 5, 0), (1, 9, 11, 3), (10, 2, 3, 15), (67, 522, 1099, 7835)])
    def test_matches_rational_enumeration(self, cells):
        t = ContingencyTable(*cells)
        N, K, n, x = margins(t)
        assert fisher_pvalue_less(t) == pytest.approx(float(exact_cdf(x, N, K, n)), abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(tables)
    def test_random_tables(self, t):
        N, K, n, x = margins(t)
        expected = 1.0 if min(t.row1, t.row0, t.col1, t.col0) == 0 else float(exact_cdf(x, N, K, n))
        assert abs(fisher_pvalue_less(t) - expected) <= 1e-12

    def test_p_increases_with_n11_at_fixed_margins(self):
        N, K, n = 80, 30, 35
        lo, hi = support(N, K, n)
        ps = [noncentral_cdf(x, N, K, n) for x in range(lo, hi + 1)]
        # strictly increasing in exact arithmetic; the upper tail saturates at 1.0 in floats
        assert all(a <= b for a, b in zip(ps, ps[1:]))
        assert all(a < b for a, b in zip(ps, ps[1:]) if b < 1 - 1e-9)
        assert ps[-1] == 1.0

    def test_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        for cells in [(67, 522, 1099, 7835), (5, 20, 30, 8), (12, 40, 40, 300)]:
            t = ContingencyTable(*cells)
            _, p = scipy_stats.fisher_exact(t.as_matrix(), alternative="less")
            assert fisher_pvalue_less(t) == pytest.approx(p, rel=1e-10)


class TestDistribution:
    def test_log_pmf_against_exact(self):
        N, K, n = 50, 20, 17
        for k in range(*support(N, K, n)):
            exact = math.log(comb(K, k) * comb(N - K, n - k)) - math.log(comb(N, n))
            assert log_hypergeom_pmf(k, N, K, n) == pytest.approx(exact, abs=1e-10)

    @pytest.mark.parametrize("N,K,n", [(20000, 10000, 10000), (20000, 1166, 589)])
    def test_log_pmf_large_n(self, N, K, n):
        lo, hi = support(N, K, n)
        for k in range(lo, hi + 1, max(1, (hi - lo) // 25)):
            exact = Fraction(comb(K, k) * comb(N - K, n - k), comb(N, n))
            log_exact = math.log(exact.numerator) - math.log(exact.denominator)
            assert log_hypergeom_pmf(k, N, K, n) == pytest.approx(log_exact, abs=5e-11)
        total = math.fsum(math.exp(log_hypergeom_pmf(k, N, K, n)) for k in range(lo, hi + 1))
        assert abs(total - 1.0) <= 1e-12

    def test_log_binom(self):
        assert log_binom(50, 20) == pytest.approx(math.log(comb(50, 20)), rel=1e-13)
        # differencing lgamma values near 1.3e7 leaves an absolute error of order eps * 1.3e7
        assert log_binom(10**6, 3) == pytest.approx(math.log(comb(10**6, 3)), abs=1e-8)

    def test_log_pmf_outside_support(self):
        with pytest.raises(ValueError):
            log_hypergeom_pmf(11, 20, 10, 10)

    @pytest.mark.parametrize("psi", [Fraction(1, 10), Fraction(1, 2), Fraction(2), Fraction(10)])
    def test_noncentral_pmf_against_exact(self, psi):
        N, K, n = 40, 15, 22
        lo, hi = support(N, K, n)
        for k in range(lo, hi + 1):
            exact = exact_cdf(k, N, K, n, psi) - exact_cdf(k - 1, N, K, n, psi)
            assert noncentral_pmf(k, N, K, n, float(psi)) == pytest.approx(float(exact), abs=1e-13)

    @pytest.mark.parametrize("psi", [0.1, 0.5, 1.0, 2.0, 10.0])
    @pytest.mark.parametrize("N,K,n", [(20, 7, 9), (1000, 300, 450), (20000, 1166, 589), (20000, 10000, 10000)])
    def test_normalized(self, N, K, n, psi):
        _, probs = noncentral_pmf_vector(N, K, n, psi)
        assert abs(math.fsum(probs) - 1.0) <= 1e-12
        assert np.all(probs >= 0)

    def test_support_bounds(self):
        assert support(10, 7, 6) == (3, 6)
        with pytest.raises(ValueError):
            support(5, 6, 1)
        with pytest.raises(TypeError):
            support(5.0, 1, 1)

    def test_rejects_nonpositive_psi(self):
        with pytest.raises(ValueError):
            noncentral_pmf_vector(10, 5, 5, 0.0)

    def test_cdf_decreases_in_psi(self):
        values = [noncentral_cdf(67, 9523, 1166, 589, psi) for psi in (0.5, 0.8, 1.0, 1.3, 2.0)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestEstimates:
    def test_table2_reproduction(self):
        r = fisher_less(TABLE2)
        assert abs(r.p_value - 0.278) <= 0.0005
        assert abs(r.odds_ratio - 0.915) <= 0.0005
        assert r.ci_low == 0
        assert abs(r.ci_high - 1.146) <= 0.0005
        assert r.fisher_line() == "p=0.278, OR=0.915, CI=[0, 1.146]"

    def test_cmle_solves_the_mean_equation(self):
        N, K, n, x = margins(TABLE2)
        psi = conditional_mle_odds_ratio(x, N, K, n)
        assert noncentral_mean(N, K, n, psi) == pytest.approx(x, rel=1e-8)

    def test_upper_bound_has_tail_probability_alpha(self):
        N, K, n, x = margins(TABLE2)
        upper = upper_confidence_bound(x, N, K, n, 0.95)
        assert noncentral_cdf(x, N, K, n, upper) == pytest.approx(0.05, rel=1e-6)

    def test_cmle_close_to_sample_odds_ratio(self):
        t = TABLE2
        sample = (t.n11 * t.n00) / (t.n10 * t.n01)
        cmle = fisher_less(t).odds_ratio
        assert sample / 1.2 < cmle < sample * 1.2

    def test_matches_scipy_conditional_odds_ratio(self):
        contingency = pytest.importorskip("scipy.stats.contingency")
        for cells in [(67, 522, 1099, 7835), (5, 20, 30, 8), (3, 1, 1, 3)]:
            t = ContingencyTable(*cells)
            ref = contingency.odds_ratio(t.as_matrix(), kind="conditional")
            ci = ref.confidence_interval(0.95, alternative="less")
            r = fisher_less(t)
            assert r.odds_ratio == pytest.approx(ref.statistic, rel=1e-6)
            assert r.ci_high == pytest.approx(ci.high, rel=1e-6)

    def test_boundary_observations(self):
        # n11 at the bottom of its support: the MLE is 0 and the bound stays finite
        t = ContingencyTable(0, 10, 10, 5)
        r = fisher_less(t)
        assert r.odds_ratio == 0
        assert 0 < r.ci_high < math.inf
        # n11 at the top: MLE is infinite
        top = fisher_less(ContingencyTable(10, 0, 5, 10))
        assert top.odds_ratio == math.inf and top.ci_high == math.inf
        assert top.p_value == 1.0

    def test_degenerate_margin(self):
        r = fisher_less(ContingencyTable(0, 0, 4, 9))
        assert r.degenerate and r.p_value == 1.0
        assert math.isnan(r.odds_ratio) and r.ci_high == math.inf

    def test_wider_interval_for_higher_confidence(self):
        assert fisher_less(TABLE2, 0.99).ci_high > fisher_less(TABLE2, 0.9).ci_high

    @settings(max_examples=60, deadline=None)
    @given(tables)
    def test_estimate_inside_interval(self, t):
        r = fisher_less(t)
        if not r.degenerate:
            assert r.ci_low <= r.odds_ratio <= r.ci_high

    def test_result_round_trip(self):
        r = fisher_less(TABLE2)
        assert FisherResult.from_dict(r.to_dict()) == r
        assert r.to_dict()["display"]["p_value"] == "0.278"


class TestRounding:
    def test_table_percentages(self):
        assert summarize_percentages(TABLE2) == {"n11": "0.7%", "n10": "5.5%", "n01": "11.5%", "n00": "82.3%"}
        assert summarize_percentages(TABLE1) == {"n11": "12.1%", "n10": "3.8%", "n01": "51.3%", "n00": "32.7%"}

    def test_half_up_at_exact_ties(self):
        assert percent_half_up(1, 16) == "6.3%"  # 6.25
        assert percent_half_up(1, 80) == "1.3%"  # 1.25
        assert percent_half_up(0, 7) == "0.0%"
        assert percent_half_up(7, 7) == "100.0%"

    def test_format_half_up(self):
        assert format_half_up(0.2775) == "0.278"
        assert format_half_up(1.0) == "1.000"
        assert format_half_up(math.inf) == "inf"

    def test_margin_percentages(self):
        assert margin_percentages(TABLE2)["row1"] == "6.2%"

    def test_empty_table(self):
        with pytest.raises(ValueError):
            summarize_percentages(ContingencyTable(0, 0, 0, 0))
