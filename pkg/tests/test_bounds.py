import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ermstab.bounds import (
    BinomialSpec,
    central_window_prob,
    erm_in_hstar_lower_bound,
    odd_central_binom_prob,
    pair_mismatch_prob,
    thm25_training_rate,
    thm25_weak_rate,
    tie_gap_lower_bound,
    tie_gap_probability,
    tie_gap_upper_bound,
    tie_gap_upper_bound_terms,
)
from ermstab.exceptions import ValidationError
from ermstab.model import NO_GAP
from ermstab.scenarios import default_scenarios

P_GRID = [Fraction(k, 10) for k in range(1, 10)]


class TestCentralWindow:
    @pytest.mark.parametrize("k,expected", [(0, 1), (2, Fraction(1, 2)), (3, Fraction(3, 4))])
    def test_examples(self, k, expected):
        assert central_window_prob(k) == expected

    @pytest.mark.parametrize("k", range(0, 13))
    def test_matches_coin_enumeration(self, k):
        assert central_window_prob(k) == oracles.coin_window(k)

    def test_float_view(self):
        for k in (1, 10, 101, 400):
            assert central_window_prob(k, "float") == pytest.approx(float(central_window_prob(k)), rel=1e-12)

    def test_decreasing_within_parity(self):
        values = [central_window_prob(k) for k in range(0, 200)]
        for k in range(2, 200):
            assert values[k] <= values[k - 2]


class TestOddCentral:
    @pytest.mark.parametrize("k,expected", [(0, Fraction(1, 2)), (2, Fraction(3, 8)), (3, Fraction(3, 8))])
    def test_examples(self, k, expected):
        assert odd_central_binom_prob(k) == expected

    def test_below_window(self):
        for k in range(0, 501):
            assert central_window_prob(k) >= odd_central_binom_prob(k)

    def test_stirling_regime(self):
        scaled = [math.sqrt(k) * float(odd_central_binom_prob(k)) for k in range(100, 501)]
        assert max(abs(b / a - 1) for a, b in zip(scaled, scaled[1:])) < 0.01
        # C(2j+1, j) 2^-(2j+1) ~ (pi j)^(-1/2) with j = k/2
        assert scaled[-1] == pytest.approx(math.sqrt(2 / math.pi), rel=0.01)


class TestTieGap:
    def test_p1_m3(self):
        assert tie_gap_probability(1, 3) == Fraction(1, 2)

    @pytest.mark.parametrize("p", [0, Fraction(3, 10), 1])
    def test_m2_is_one(self, p):
        assert tie_gap_probability(p, 2) == 1

    def test_p0_is_one(self):
        assert tie_gap_probability(0, 40) == 1

    def test_frozen_m12(self):
        assert tie_gap_probability(Fraction(1, 2), 12) == Fraction(499681, 1048576)

    @pytest.mark.parametrize("p", [Fraction(3, 10), Fraction(1, 2), Fraction(4, 5)])
    def test_matches_enumeration(self, p):
        for m in range(2, 11):
            value = tie_gap_probability(p, m, "rational")
            assert value == oracles.tie_gap_by_counts(p, m)
            if m <= 8:
                assert value == oracles.tie_gap_by_sequences(p, m)

    def test_float_matches_rational(self):
        for p in P_GRID:
            for m in (5, 50, 300):
                assert tie_gap_probability(p, m, "float") == pytest.approx(
                    float(tie_gap_probability(p, m, "rational")), rel=1e-10
                )

    def test_auto_switches_to_float(self):
        assert isinstance(tie_gap_probability(Fraction(1, 2), 1500), float)
        assert isinstance(tie_gap_probability(Fraction(1, 2), 50), Fraction)

    @pytest.mark.parametrize("p", P_GRID[::2])
    def test_inverse_root_band(self, p):
        scaled = [float(tie_gap_probability(p, m)) * math.sqrt(m) for m in range(20, 501, 20)]
        assert max(scaled) / min(scaled) <= 3


class TestSandwich:
    def test_upper_dominates_at_half_50(self):
        p = Fraction(1, 2)
        assert tie_gap_probability(p, 50) <= tie_gap_upper_bound(p, 50)

    @pytest.mark.parametrize("p", P_GRID)
    def test_chain(self, p):
        for m in range(3, 121):
            mid = tie_gap_probability(p, m)
            assert tie_gap_lower_bound(m) <= mid <= tie_gap_upper_bound(p, m)
            assert mid <= tie_gap_upper_bound(p, m, tail="chernoff")

    def test_lower_bound_is_window_minimum(self):
        for m in range(2, 14):
            assert tie_gap_lower_bound(m) == min(oracles.coin_window(k) for k in range(m))

    def test_p1_uses_half_ceiling(self):
        for m in (3, 10, 11, 50):
            assert tie_gap_upper_bound_terms(1, m).c == math.ceil(Fraction(m - 1, 2))

    def test_empty_sup(self):
        terms = tie_gap_upper_bound_terms(Fraction(1, 10), 3)
        assert terms.c == 1
        assert terms.sup == central_window_prob(2)

    def test_rejections(self):
        with pytest.raises(ValidationError):
            tie_gap_upper_bound(0, 10)
        with pytest.raises(ValidationError):
            tie_gap_upper_bound(Fraction(1, 2), 2)
        with pytest.raises(ValidationError):
            tie_gap_upper_bound(Fraction(1, 2), 10, tail="hoeffding")


class TestErmInHstarBound:
    def test_single_hypothesis(self):
        assert erm_in_hstar_lower_bound(1, Fraction(1, 2), 10).value == 1

    def test_eps_tenth(self):
        assert erm_in_hstar_lower_bound(3, Fraction(1, 10), 200).value == pytest.approx(1 - 2 * math.exp(-1))
        assert erm_in_hstar_lower_bound(3, Fraction(1, 10), 200).value == pytest.approx(0.26424, abs=1e-5)

    def test_eps_half(self):
        assert erm_in_hstar_lower_bound(3, Fraction(1, 2), 60).value == pytest.approx(1 - 2 * math.exp(-7.5))

    def test_clamped(self):
        bound = erm_in_hstar_lower_bound(5, Fraction(1, 10), 2)
        assert bound.value == 0 and bound.raw < 0

    def test_no_gap_rejected(self):
        with pytest.raises(ValidationError):
            erm_in_hstar_lower_bound(2, NO_GAP, 10)
        with pytest.raises(ValidationError):
            erm_in_hstar_lower_bound(2, 0, 10)


class TestRates:
    def test_training_rate(self):
        assert thm25_training_rate(100) == pytest.approx(0.039894, abs=1e-6)
        assert thm25_training_rate(3) == pytest.approx(0.23033, abs=1e-5)
        assert 0.5 <= 0.25 / thm25_training_rate(3) <= 2

    def test_weak_rate(self):
        assert thm25_weak_rate(0.7, 100) == pytest.approx(math.exp(-(2 - 1 / 0.7) ** 2 * 100 / 8))
        assert (2 - 1 / 0.7) ** 2 / 8 == pytest.approx(0.040816, abs=1e-6)
        assert thm25_weak_rate(1, 40) == pytest.approx(math.exp(-5))

    def test_weak_rate_degenerates_near_half(self):
        assert thm25_weak_rate(Fraction(501, 1000), 100) > 0.99

    @pytest.mark.parametrize("p", [0.4, 0.5, Fraction(1, 2)])
    def test_weak_rate_rejects(self, p):
        with pytest.raises(ValidationError):
            thm25_weak_rate(p, 10)

    def test_pair_mismatch(self):
        assert pair_mismatch_prob(0.5) == 0.125
        assert pair_mismatch_prob(Fraction(1)) == Fraction(1, 2)

    @pytest.mark.parametrize("spec", [s for s in default_scenarios() if s.n_minimizers == 2],
                             ids=lambda s: s.label)
    def test_pair_mismatch_matches_scenarios(self, spec):
        assert spec.pair_mismatch_mass() == pair_mismatch_prob(spec.disagreement_mass)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 30), st.fractions(0, 1))
def test_binomial_spec_sums_to_one(n, q):
    spec = BinomialSpec(n, q)
    assert sum(spec.pmf(k) for k in range(n + 1)) == 1
    assert spec.pmf(-1) == spec.pmf(n + 1) == 0
