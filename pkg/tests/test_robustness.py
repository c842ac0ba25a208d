"""Tests for estimator and test influence functions."""

import numpy as np
import pytest
from scipy import integrate, stats

from app.exceptions import ParameterError
from app.models.domain import IfKind, SnParams
from app.services import robustness, skew_normal
from app.services.asymptotics import covariance
from app.services.hypothesis import parse_hypothesis

THETA = SnParams(0.0, 1.0, 1.0)
GAMMA_NULL = parse_hypothesis("gamma=1")


class TestEstimatorInfluence:
    def test_bounded_for_positive_alpha(self):
        grid = np.linspace(-200.0, 200.0, 801)
        values = np.abs(robustness.estimator_if_array(grid, THETA, 0.5))
        assert np.all(np.isfinite(values))
        assert values.max() < 100.0
        # flat at -J^-1 xi once f^alpha underflows
        np.testing.assert_allclose(values[0], values[1], atol=1e-12)
        np.testing.assert_allclose(values[-1], values[-2], atol=1e-12)

    def test_unbounded_for_mle(self):
        far = robustness.estimator_if(50.0, THETA, 0.0)
        near = robustness.estimator_if(5.0, THETA, 0.0)
        assert abs(far[2]) >= 10 * abs(near[2])

    def test_mean_zero_under_model(self):
        expectation = [
            integrate.quad(
                lambda y, k=k: robustness.estimator_if(y, THETA, 0.3)[k] * skew_normal.pdf(THETA, y),
                -12, 12, limit=200, points=[0.0],
            )[0]
            for k in range(3)
        ]
        np.testing.assert_allclose(expectation, 0.0, atol=1e-7)

    def test_negative_alpha(self):
        with pytest.raises(ParameterError):
            robustness.estimator_if(0.0, THETA, -0.5)


class TestTestInfluence:
    def test_second_order_nonnegative(self):
        values = robustness.test_if2_array(np.linspace(-20, 20, 81), THETA, 0.5, GAMMA_NULL)
        assert np.all(values >= 0)

    def test_second_order_matches_estimator_if(self):
        y = 2.5
        influence = robustness.estimator_if(y, THETA, 0.3)
        shape_variance = covariance(THETA, 0.3).sigma_matrix[2, 2]
        expected = 2 * influence[2] ** 2 / shape_variance
        assert robustness.test_if2(y, THETA, 0.3, GAMMA_NULL) == pytest.approx(expected, rel=1e-8)

    def test_null_must_hold(self):
        with pytest.raises(ParameterError):
            robustness.test_if2(0.0, THETA, 0.5, parse_hypothesis("gamma=0"))

    def test_power_influence_zero_direction(self):
        with pytest.raises(ParameterError):
            robustness.test_pif(0.0, THETA, 0.5, GAMMA_NULL, [0.0, 0.0, 0.0])

    def test_power_influence_level(self):
        with pytest.raises(ParameterError):
            robustness.test_pif(0.0, THETA, 0.5, GAMMA_NULL, [0.0, 0.0, 4.0], tau0=0.0)

    def test_power_influence_bounded(self):
        values = robustness.test_pif_array(np.linspace(-100, 100, 201), THETA, 0.5, GAMMA_NULL, [0.0, 0.0, 4.0])
        assert np.all(np.isfinite(values))
        assert np.max(np.abs(values)) < 100.0


class TestPowerSeries:
    @pytest.mark.parametrize("s,r", [(0.5, 1), (3.0, 1), (10.0, 1), (4.0, 3), (40.0, 2)])
    def test_is_twice_power_derivative(self, s, r):
        crit = stats.chi2.isf(0.05, r)
        h = 1e-5
        numeric = (stats.ncx2.sf(crit, r, s + h) - stats.ncx2.sf(crit, r, s - h)) / (2 * h)
        assert robustness.c_star(s, r, 0.05) == pytest.approx(2 * numeric, abs=1e-6)

    def test_known_value(self):
        # e^{-s/2} scales every term, the v = 0 term included
        assert robustness.c_star(3.0, 1, 0.05) == pytest.approx(0.224172, abs=1e-5)

    def test_at_zero(self):
        crit = stats.chi2.isf(0.05, 1)
        expected = stats.chi2.sf(crit, 3) - stats.chi2.sf(crit, 1)
        assert robustness.c_star(0.0, 1, 0.05) == pytest.approx(expected, abs=1e-14)

    def test_series_reports_terms(self):
        series = robustness.c_star_series(10.0, 1, 0.05)
        assert series.terms > 5
        assert abs(series.last_term) < 1e-14 * abs(series.value)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            robustness.c_star(-1.0, 1, 0.05)


class TestCurves:
    def test_estimator_curve_shape(self):
        curve = robustness.if_curve(IfKind.ESTIMATOR_IF, THETA, 0.5, np.arange(-3.0, 3.5, 0.5))
        assert curve.values.shape == (13, 3)
        assert curve.kind is IfKind.ESTIMATOR_IF

    def test_test_curves(self):
        grid = [-1.0, 0.0, 1.0]
        if2 = robustness.if_curve("test_if2", THETA, 0.5, grid, GAMMA_NULL)
        pif = robustness.if_curve("test_pif", THETA, 0.5, grid, GAMMA_NULL, [0.0, 0.0, 4.0])
        assert if2.values.shape == (3,) and pif.values.shape == (3,)

    def test_grid_validation(self):
        with pytest.raises(ParameterError):
            robustness.if_curve(IfKind.ESTIMATOR_IF, THETA, 0.5, [1.0, 0.0])
        with pytest.raises(ParameterError):
            robustness.if_curve(IfKind.ESTIMATOR_IF, THETA, 0.5, [])

    def test_test_curves_need_hypothesis_and_direction(self):
        with pytest.raises(ParameterError):
            robustness.if_curve(IfKind.TEST_IF2, THETA, 0.5, [0.0])
        with pytest.raises(ParameterError):
            robustness.if_curve(IfKind.TEST_PIF, THETA, 0.5, [0.0], GAMMA_NULL)
