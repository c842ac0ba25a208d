"""Tests for the gradient-descent, likelihood and genetic-algorithm fits."""

import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import ConfigurationError, DegenerateDataError
from app.models.domain import DpdConfig, FitMethod, GaConfig, GdConfig, ParameterBox, Sample, SnParams
from app.services import dpd_core, estimation, skew_normal


SMALL_GA = GaConfig(population=20, elites=2, max_generations=40, stall_generations=20, rng_seed=3)


class TestGradientDescent:
    def test_recovers_parameters(self, skewed_sample):
        fit = estimation.fit_gd(skewed_sample, 0.5)
        assert fit.converged, fit.message
        assert fit.method is FitMethod.GRADIENT_DESCENT
        assert fit.gradient_norm <= 1e-6
        assert abs(fit.params.mu) < 0.5
        assert 0.6 < fit.params.sigma < 1.5
        assert 0.5 < fit.params.gamma < 6.0
        assert fit.std_errors is not None and np.all(fit.std_errors > 0)
        assert fit.n == skewed_sample.n

    def test_trace_non_increasing(self, skewed_sample):
        fit = estimation.fit_gd(skewed_sample, 0.3)
        trace = np.array(fit.trace)
        assert np.all(np.diff(trace) <= 1e-12)
        assert fit.objective_value == pytest.approx(trace[-1])

    def test_fixed_step_rule(self, skewed_sample):
        bb = estimation.fit_gd(skewed_sample, 0.5)
        fixed = estimation.fit_gd(skewed_sample, 0.5, GdConfig(step_rule="fixed", max_iters=20000))
        assert fixed.objective_value >= bb.objective_value - 1e-9
        np.testing.assert_allclose(fixed.params.as_array(), bb.params.as_array(), atol=1e-2)

    def test_alpha_zero_rejected(self, skewed_sample):
        with pytest.raises(ConfigurationError):
            estimation.fit_gd(skewed_sample, 0.0)

    def test_constant_sample(self):
        with pytest.raises(DegenerateDataError):
            estimation.fit_gd(Sample(values=[2.0] * 10), 0.5)


class TestEquivariance:
    """Fitting 3x - 7 gives the transformed fit of x."""

    @pytest.fixture(scope="class")
    def pair(self):
        x = skew_normal.sample(SnParams(0.0, 1.0, 2.0), 500, rng_seed=31)
        return x, Sample(values=3.0 * x.values - 7.0)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
    def test_location_scale(self, pair, alpha):
        x, y = pair
        if alpha == 0.0:
            fit_x, fit_y = estimation.fit_mle(x), estimation.fit_mle(y)
        else:
            fit_x, fit_y = estimation.fit_gd(x, alpha), estimation.fit_gd(y, alpha)
        expected = [3.0 * fit_x.params.mu - 7.0, 3.0 * fit_x.params.sigma, fit_x.params.gamma]
        np.testing.assert_allclose(fit_y.params.as_array(), expected, atol=1e-3)


class TestLikelihood:
    def test_objective_is_mean_loglik(self, skewed_sample):
        fit = estimation.fit_mle(skewed_sample)
        assert fit.converged, fit.message
        assert fit.alpha == 0.0
        assert fit.method is FitMethod.MLE
        expected = -dpd_core.negative_log_likelihood(fit.params, skewed_sample)
        assert fit.objective_value == pytest.approx(expected, rel=1e-12)

    def test_mle_is_stationary(self, skewed_sample):
        fit = estimation.fit_mle(skewed_sample)
        gradient = dpd_core.negative_log_likelihood_gradient(fit.params, skewed_sample)
        assert np.linalg.norm(gradient) <= 1e-6


class TestStartingValues:
    def test_normal_data_starts_symmetric(self):
        data = Sample(values=[-2.0, -1.0, 0.0, 1.0, 2.0])
        start = estimation.default_init(data)
        assert start.gamma == 0.0
        assert start.mu == 0.0

    def test_skewness_sign_carried(self, skewed_sample):
        assert estimation.default_init(skewed_sample).gamma > 0
        mirrored = Sample(values=-skewed_sample.values)
        assert estimation.default_init(mirrored).gamma < 0

    def test_extreme_skewness_clamped(self):
        data = Sample(values=[0.0] * 50 + [100.0])
        start = estimation.default_init(data)
        assert np.isfinite(start.gamma)

    def test_default_bounds_contain_start(self, skewed_sample):
        box = estimation.default_bounds(skewed_sample)
        start = estimation.default_init(skewed_sample).as_array()
        assert np.all(box.lower <= start) and np.all(start <= box.upper)


class TestGeneticAlgorithm:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_gradient_descent_objective(self, seed):
        draw = np.random.default_rng(seed)
        theta = SnParams(draw.uniform(-2.0, 2.0), draw.uniform(0.5, 3.0), draw.uniform(-3.0, 3.0))
        data = skew_normal.sample(theta, 100, rng_seed=seed)
        dpd_cfg = DpdConfig(alpha=0.5)
        ga = estimation.fit_ga(data, 0.5, SMALL_GA)
        gd = estimation.fit_gd(data, 0.5)
        gap = dpd_core.objective(ga.params, data, dpd_cfg) - dpd_core.objective(gd.params, data, dpd_cfg)
        assert abs(gap) <= 1e-5

    def test_agrees_with_gradient_descent(self, skewed_sample):
        ga = estimation.fit_ga(skewed_sample, 0.5, SMALL_GA)
        gd = estimation.fit_gd(skewed_sample, 0.5)
        assert ga.method is FitMethod.GENETIC
        np.testing.assert_allclose(ga.params.as_array(), gd.params.as_array(), atol=1e-4)

    def test_same_seed_same_result(self, skewed_sample):
        first = estimation.fit_ga(skewed_sample, 0.5, SMALL_GA)
        second = estimation.fit_ga(skewed_sample, 0.5, SMALL_GA)
        assert first.params == second.params
        assert first.trace == second.trace

    def test_best_fitness_never_worsens(self, skewed_sample):
        cfg = SMALL_GA.model_copy(update={"stall_generations": 1000, "polish": None})
        fit = estimation.fit_ga(skewed_sample, 0.5, cfg)
        trace = np.array(fit.trace)
        assert trace.size == cfg.max_generations + 1
        assert np.all(np.diff(trace) <= 0)

    def test_tournament_selection(self, skewed_sample):
        cfg = SMALL_GA.model_copy(update={"selection": "tournament"})
        fit = estimation.fit_ga(skewed_sample, 0.0, cfg)
        assert fit.alpha == 0.0
        assert fit.converged, fit.message

    def test_elites_must_be_fewer_than_population(self):
        with pytest.raises(ValidationError):
            GaConfig(population=4, elites=4)

    def test_empty_box_rejected(self, skewed_sample):
        box = ParameterBox(mu=(0.0, 1.0), sigma=(1.0, 1.0), gamma=(-1.0, 1.0))
        with pytest.raises(ConfigurationError):
            estimation.fit_ga(skewed_sample, 0.5, SMALL_GA.model_copy(update={"bounds": box}))

    def test_negative_alpha(self, skewed_sample):
        with pytest.raises(ConfigurationError):
            estimation.fit_ga(skewed_sample, -0.1, SMALL_GA)


def test_fit_on_contaminated_data_moves_less_than_mle():
    clean = skew_normal.sample(SnParams(0.0, 1.0, 2.0), 200, rng_seed=9).values
    data = Sample(values=np.concatenate([clean, np.full(10, 15.0)]))
    robust = estimation.fit_gd(data, 0.5)
    mle = estimation.fit_mle(data)
    assert abs(robust.params.mu) + abs(robust.params.sigma - 1.0) < abs(mle.params.mu) + abs(mle.params.sigma - 1.0)
