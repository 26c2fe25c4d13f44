from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ermstab.analysis import (
    ClassifyConfig,
    DecayRateClassifier,
    Phase,
    RateSeries,
    classify,
    fit_exponential,
    fit_power,
)
from ermstab.exact import exact_delta
from ermstab.exceptions import ValidationError
from ermstab.scenarios import three_hyp_two_min, two_constant, unique_min

GRID = np.array([10, 20, 40, 80, 120, 160, 240, 320])
FIVE = [25, 50, 100, 200, 400]


def exact_series(spec, notion, grid):
    return grid, [exact_delta(spec, m, notion, mode="float").delta for m in grid]


class TestFits:
    def test_inverse_root(self):
        fit = fit_power((GRID, GRID ** -0.5))
        assert fit.alpha == pytest.approx(0.5, abs=1e-9)
        assert fit.c == pytest.approx(1, abs=1e-9)
        assert fit.rss <= 1e-9

    def test_inverse_square(self):
        fit = fit_power((GRID, 3.0 * GRID ** -2.0))
        assert fit.alpha == pytest.approx(2, abs=1e-9)
        assert fit.c == pytest.approx(3, rel=1e-9)

    def test_exponential(self):
        fit = fit_exponential((GRID, 2 * np.exp(-0.1 * GRID)))
        assert fit.a == pytest.approx(2, rel=1e-9)
        assert fit.b == pytest.approx(0.1, abs=1e-9)

    def test_constant(self):
        fit = fit_exponential((GRID, np.full(len(GRID), 0.3)))
        assert fit.b == pytest.approx(0, abs=1e-12)

    def test_predict(self):
        fit = fit_power((GRID, 2.0 * GRID ** -0.7))
        np.testing.assert_allclose(fit.predict([50, 500]), 2.0 * np.array([50.0, 500.0]) ** -0.7)

    def test_fair_coin_alpha(self):
        assert 0.4 <= fit_power(exact_series(two_constant(Fraction(1, 2)), "cv", FIVE)).alpha <= 0.6

    def test_biased_coin_slope(self):
        fit = fit_exponential(exact_series(two_constant(Fraction(7, 10)), "weak", FIVE))
        assert fit.b >= 0.9 * (2 - 1 / 0.7) ** 2 / 8

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            fit_power(([1, 2, 3], [0.5, 0.4, 0.3]))

    def test_weighted_needs_ci(self):
        with pytest.raises(ValidationError):
            fit_power((GRID, GRID ** -0.5), weighted=True)

    def test_weighted(self):
        delta = GRID ** -0.5
        ci = tuple((d * 0.9, d * 1.1) for d in delta)
        fit = fit_power(RateSeries(GRID, delta, ci), weighted=True)
        assert fit.alpha == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.05, 2.0), st.floats(0.2, 3.0), st.floats(1e-3, 1e3),
    st.lists(st.floats(-0.05, 0.05), min_size=len(GRID), max_size=len(GRID)),
)
def test_scale_equivariance(alpha, c, gamma, noise):
    delta = c * GRID ** (-alpha) * np.exp(noise)
    base_p, base_e = fit_power((GRID, delta)), fit_exponential((GRID, delta))
    p, e = fit_power((GRID, gamma * delta)), fit_exponential((GRID, gamma * delta))
    assert p.alpha == pytest.approx(base_p.alpha, abs=1e-8)
    assert e.b == pytest.approx(base_e.b, abs=1e-10)
    assert p.c == pytest.approx(gamma * base_p.c, rel=1e-8)
    assert e.a == pytest.approx(gamma * base_e.a, rel=1e-8)


class TestClassify:
    def test_power_law(self):
        assert classify((GRID, GRID ** -0.5)).classification is Phase.POWER_LAW

    def test_exponential(self):
        assert classify((GRID, np.exp(-GRID / 10))).classification is Phase.EXPONENTIAL

    def test_alpha_outside_window(self):
        result = classify((GRID, GRID ** -3.0))
        assert result.classification is Phase.INCONCLUSIVE

    def test_short_span(self):
        with pytest.raises(ValidationError, match="span"):
            classify(([10, 11, 12, 13, 14, 15], [0.5, 0.4, 0.35, 0.3, 0.28, 0.26]))

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            classify((FIVE, [0.1, 0.05, 0.03, 0.02, 0.01]))

    def test_thresholds_recorded(self):
        report = classify((GRID, GRID ** -0.5)).to_dict()
        assert report["thresholds"]["rss_ratio"] == 4.0
        assert report["classification"] == "PowerLaw"

    def test_fair_coin_series(self):
        result = classify(exact_series(two_constant(Fraction(1, 2)), "cv", FIVE), ClassifyConfig(min_points=5))
        assert result.classification is Phase.POWER_LAW
        assert 0.4 <= result.power.alpha <= 0.6

    def test_biased_coin_series(self):
        result = classify(exact_series(two_constant(Fraction(7, 10)), "weak", FIVE), ClassifyConfig(min_points=5))
        assert result.classification is Phase.EXPONENTIAL

    def test_two_minimizers_and_unique(self):
        grid = list(range(20, 201, 20))
        assert classify(exact_series(three_hyp_two_min(), "cv", grid)).classification is Phase.POWER_LAW
        assert classify(exact_series(unique_min(Fraction(1, 5)), "weak", grid)).classification is Phase.EXPONENTIAL

    def test_bad_config(self):
        with pytest.raises(ValidationError):
            ClassifyConfig(min_points=3)
        with pytest.raises(ValidationError):
            ClassifyConfig(alpha_min=2, alpha_max=1)


class TestRateSeries:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            RateSeries((1, 2), (0.1, 0.0))

    def test_rejects_unsorted(self):
        with pytest.raises(ValidationError):
            RateSeries((2, 1), (0.1, 0.2))

    def test_drops_mc_zero_lower_bound(self):
        series = RateSeries.from_records([
            (10, 0.2, 0.18, 0.22, "mc"),
            (20, 0.001, 0.0, 0.004, "mc"),
            (30, 0.1, None, None, "exact"),
            (5, 0.3, 0.28, 0.32, "mc"),
        ])
        assert series.m == (5, 10, 30)
        assert series.ci is None


class TestEstimator:
    def test_fit_predict(self):
        clf = DecayRateClassifier().fit(GRID, 0.4 * GRID ** -0.5)
        assert clf.classification_ is Phase.POWER_LAW
        np.testing.assert_allclose(clf.predict([1000]), [0.4 * 1000 ** -0.5])

    def test_matches_function(self):
        delta = np.exp(-0.05 * GRID)
        clf = DecayRateClassifier(rss_ratio=10).fit(GRID, delta)
        assert clf.fit_ == classify((GRID, delta), ClassifyConfig(rss_ratio=10))

    def test_clone_and_params(self):
        clf = clone(DecayRateClassifier(min_points=5))
        assert clf.get_params()["min_points"] == 5

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            DecayRateClassifier().predict([10])
