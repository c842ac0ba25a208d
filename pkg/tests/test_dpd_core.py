"""Tests for the density power divergence integrals, objective and gradient."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from app.exceptions import ConfigurationError, IntegrationError
from app.models.domain import DpdConfig, Sample, SnParams
from app.services import dpd_core, skew_normal


class TestIntegrals:
    @pytest.mark.parametrize("sigma,beta", [(1.0, 1.5), (2.0, 2.0), (0.5, 3.0)])
    def test_power_integral_normal_closed_form(self, sigma, beta):
        expected = sigma ** (1 - beta) * (2 * math.pi) ** ((1 - beta) / 2) / math.sqrt(beta)
        value = dpd_core.power_integral(SnParams(0.0, sigma, 0.0), beta)
        assert value == pytest.approx(expected, rel=1e-8)

    def test_power_integral_matches_quadrature(self):
        theta = SnParams(1.0, 1.5, 3.0)
        direct, _ = integrate.quad(lambda x: skew_normal.pdf(theta, x) ** 1.5, -30, 30, limit=200, points=[1.0])
        assert dpd_core.power_integral(theta, 1.5) == pytest.approx(direct, rel=1e-8)

    def test_power_integral_at_one_is_mass(self):
        assert dpd_core.power_integral(SnParams(0.0, 2.0, -4.0), 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_score_has_zero_mean(self):
        np.testing.assert_allclose(dpd_core.weighted_score_integral(SnParams(0.0, 1.0, 2.0), 1.0), 0.0, atol=1e-9)

    def test_xi_matches_quadrature(self):
        theta = SnParams(0.5, 1.2, -1.5)
        alpha = 0.5
        direct = [
            integrate.quad(
                lambda x, k=k: skew_normal.score(theta, x)[k] * skew_normal.pdf(theta, x) ** (1 + alpha),
                -25, 25, limit=200, points=[0.5],
            )[0]
            for k in range(3)
        ]
        np.testing.assert_allclose(dpd_core.xi(theta, alpha), direct, atol=1e-8)

    def test_outer_integral_symmetric(self):
        matrix = dpd_core.weighted_outer_integral(SnParams(0.0, 1.0, 1.0), 1.5)
        np.testing.assert_array_equal(matrix, matrix.T)


class TestObjective:
    def test_alpha_zero_rejected(self, small_sample):
        with pytest.raises(ConfigurationError):
            dpd_core.objective(SnParams(1, 2, 1.5), small_sample, DpdConfig(alpha=0.0))

    def test_gradient_matches_finite_differences(self, small_sample):
        cfg = DpdConfig(alpha=0.5)
        theta = SnParams(0.8, 1.9, 1.2)
        analytic = dpd_core.objective_gradient(theta, small_sample, cfg)
        h = 1e-5
        for k in range(3):
            up, down = theta.as_array(), theta.as_array()
            up[k] += h
            down[k] -= h
            numeric = (
                dpd_core.objective(SnParams.from_array(up), small_sample, cfg)
                - dpd_core.objective(SnParams.from_array(down), small_sample, cfg)
            ) / (2 * h)
            assert analytic[k] == pytest.approx(numeric, abs=1e-5)

    def test_psi_has_zero_model_expectation(self):
        theta = SnParams(0.0, 1.0, 2.0)
        cfg = DpdConfig(alpha=0.3)
        expectation = [
            integrate.quad(
                lambda x, k=k: dpd_core.psi(theta, np.array([x]), cfg)[0, k] * skew_normal.pdf(theta, x),
                -15, 15, limit=200, points=[0.0],
            )[0]
            for k in range(3)
        ]
        np.testing.assert_allclose(expectation, 0.0, atol=1e-8)

    def test_likelihood_gradient_matches_finite_differences(self, small_sample):
        theta = SnParams(1.2, 2.1, 1.0)
        analytic = dpd_core.negative_log_likelihood_gradient(theta, small_sample)
        h = 1e-6
        for k in range(3):
            up, down = theta.as_array(), theta.as_array()
            up[k] += h
            down[k] -= h
            numeric = (
                dpd_core.negative_log_likelihood(SnParams.from_array(up), small_sample)
                - dpd_core.negative_log_likelihood(SnParams.from_array(down), small_sample)
            ) / (2 * h)
            assert analytic[k] == pytest.approx(numeric, abs=1e-6)

    def test_objective_prefers_true_parameters(self):
        theta = SnParams(0.0, 1.0, 2.0)
        data = skew_normal.sample(theta, 2000, rng_seed=5)
        cfg = DpdConfig(alpha=0.5)
        assert dpd_core.objective(theta, data, cfg) < dpd_core.objective(SnParams(1.0, 1.0, 2.0), data, cfg)

    def test_objective_is_finite_for_constant_like_data(self):
        data = Sample(values=[0.0, 1e-3, 2e-3, 3e-3, 4e-3])
        assert math.isfinite(dpd_core.objective(SnParams(0.0, 0.01, 0.0), data, DpdConfig(alpha=1.0)))


class TestDivergence:
    normal = staticmethod(stats.norm(0, 1).pdf)
    shifted = staticmethod(stats.norm(1, 1).pdf)

    def test_self_divergence_is_zero(self):
        assert dpd_core.dpd_divergence(self.normal, self.normal, 0.5) == pytest.approx(0.0, abs=1e-10)

    def test_kullback_leibler_limit(self):
        assert dpd_core.dpd_divergence(self.normal, self.shifted, 0.0) == pytest.approx(0.5, abs=1e-8)

    def test_alpha_one_closed_form(self):
        expected = (1.0 - math.exp(-0.25)) / math.sqrt(math.pi)
        assert dpd_core.dpd_divergence(self.normal, self.shifted, 1.0) == pytest.approx(expected, abs=1e-10)

    def test_window_too_narrow(self):
        with pytest.raises(IntegrationError):
            dpd_core.dpd_divergence(self.normal, self.shifted, 0.5, window=(-2.0, 2.0))
