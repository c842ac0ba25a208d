"""Tests for the skew-normal density, distribution function, score and sampling."""

import math

import numpy as np
import pytest
from scipy import integrate

from app.exceptions import DomainError, ParameterError
from app.models.domain import SnParams
from app.services import skew_normal


STANDARD = SnParams(0.0, 1.0, 0.0)


class TestDensity:
    def test_reduces_to_normal(self):
        assert skew_normal.pdf(STANDARD, 0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-12)
        assert skew_normal.pdf(SnParams(2.0, 3.0, 0.0), 2.0) == pytest.approx(1.0 / (3.0 * math.sqrt(2.0 * math.pi)))

    def test_value_at_location(self):
        # Phi(0) = 1/2 so the density at mu is phi(0)/sigma for any gamma
        assert skew_normal.pdf(SnParams(1.0, 2.0, 4.0), 1.0) == pytest.approx(0.3989422804 / 2.0, abs=1e-10)

    @pytest.mark.parametrize("theta", [SnParams(0, 1, 5), SnParams(-2, 0.5, -3), SnParams(4, 3, 0.7)])
    def test_integrates_to_one(self, theta):
        total, _ = integrate.quad(lambda x: skew_normal.pdf(theta, x), -np.inf, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_logpdf_matches_pdf(self):
        theta = SnParams(0.5, 1.5, -2.0)
        for x in (-3.0, 0.0, 2.5):
            assert skew_normal.logpdf(theta, x) == pytest.approx(math.log(skew_normal.pdf(theta, x)), rel=1e-12)

    def test_far_tail_logpdf_finite(self):
        assert math.isfinite(skew_normal.logpdf(SnParams(0.0, 1.0, 5.0), -20.0))

    def test_non_finite_x(self):
        with pytest.raises(DomainError):
            skew_normal.pdf(STANDARD, math.nan)


class TestDistributionFunction:
    def test_values(self):
        assert skew_normal.cdf(STANDARD, 0.0) == pytest.approx(0.5, abs=1e-12)
        # Phi(0) - 2 T(0, 1) = 1/2 - 1/4
        assert skew_normal.cdf(SnParams(0.0, 1.0, 1.0), 0.0) == pytest.approx(0.25, abs=1e-12)

    def test_matches_integrated_density(self):
        theta = SnParams(1.0, 2.0, 3.0)
        for x in (-1.0, 1.0, 2.5, 6.0):
            integral, _ = integrate.quad(lambda t: skew_normal.pdf(theta, t), -np.inf, x, limit=200)
            assert skew_normal.cdf(theta, x) == pytest.approx(integral, abs=1e-8)

    def test_monotone_and_bounded(self):
        theta = SnParams(0.0, 1.0, -4.0)
        values = [skew_normal.cdf(theta, x) for x in np.linspace(-6.0, 6.0, 61)]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestScore:
    def test_normal_case(self):
        np.testing.assert_allclose(skew_normal.score(STANDARD, 0.0), [0.0, -1.0, 0.0], atol=1e-14)

    def test_matches_finite_differences(self):
        theta = SnParams(0.3, 1.7, 2.2)
        h = 1e-6
        for x in (-2.0, 0.4, 3.1):
            analytic = skew_normal.score(theta, x)
            for k in range(3):
                up, down = theta.as_array(), theta.as_array()
                up[k] += h
                down[k] -= h
                numeric = (
                    skew_normal.logpdf(SnParams.from_array(up), x) - skew_normal.logpdf(SnParams.from_array(down), x)
                ) / (2 * h)
                assert analytic[k] == pytest.approx(numeric, abs=1e-5)

    def test_finite_in_deep_tail(self):
        # Phi(gamma z) underflows here; the log-space Mills ratio must not
        assert np.all(np.isfinite(skew_normal.score(SnParams(0.0, 1.0, 5.0), -3.0)))
        assert np.all(np.isfinite(skew_normal.score(SnParams(0.0, 1.0, 5.0), -30.0)))


class TestMoments:
    def test_symmetric_case(self):
        m = skew_normal.moments(SnParams(2.0, 3.0, 0.0))
        assert (m.mean, m.variance, m.skewness, m.delta) == (2.0, 9.0, 0.0, 0.0)

    def test_unit_shape(self):
        m = skew_normal.moments(SnParams(0.0, 1.0, 1.0))
        b = math.sqrt(2.0 / math.pi) / math.sqrt(2.0)
        assert m.delta == pytest.approx(1.0 / math.sqrt(2.0))
        assert m.mean == pytest.approx(b)
        assert m.variance == pytest.approx(1.0 - b * b)

    def test_skewness_sign_and_limit(self):
        assert skew_normal.moments(SnParams(0, 1, -3)).skewness < 0
        assert skew_normal.moments(SnParams(0, 1, 1e6)).skewness == pytest.approx(skew_normal.MAX_SKEWNESS, rel=1e-6)
        assert skew_normal.MAX_SKEWNESS == pytest.approx(0.9952717, abs=1e-6)


class TestSampling:
    def test_fixed_seed_reproduces(self):
        theta = SnParams(0.0, 1.0, 3.0)
        first = skew_normal.sample(theta, 50, rng_seed=11)
        second = skew_normal.sample(theta, 50, rng_seed=11)
        np.testing.assert_array_equal(first.values, second.values)
        assert first.source == "simulated:seed=11"

    def test_sample_mean(self):
        theta = SnParams(1.0, 2.0, 4.0)
        draws = skew_normal.sample(theta, 200_000, rng_seed=3)
        m = skew_normal.moments(theta)
        assert draws.values.mean() == pytest.approx(m.mean, abs=0.02)
        assert draws.values.var() == pytest.approx(m.variance, rel=0.02)

    def test_positive_shape_skews_right(self):
        draws = skew_normal.sample(SnParams(0.0, 1.0, 5.0), 5000, rng_seed=1).values
        assert np.mean(draws > 0) > 0.9

    def test_invalid_arguments(self):
        with pytest.raises(ParameterError):
            SnParams(0.0, 0.0, 1.0)
        with pytest.raises(ParameterError):
            SnParams(0.0, 1.0, math.inf)
        with pytest.raises(ParameterError):
            skew_normal.sample(STANDARD, 0)
