import os

import numpy as np
import pytest
from scipy import stats

from src.errors import DegenerateWindowError, EmptyWindowError, ValidationError
from src.models.estimates import CALENDAR_MONTH, FIXED_COUNT
from src.models.mrw import MrwParams
from src.models.quotes import SampledSeries
from src.services.mle_service import FitOptions, MleService
from src.services.mrw_service import MrwService


@pytest.fixture
def service(settings):
    return MleService(settings)


def params(lam=0.4, sigma=1.0, T=8.0, dt=1.0):
    return MrwParams(lam=lam, sigma=sigma, T=T, dt=dt)


def variance_of(p):
    return p.sigma ** 2 * MrwService().normalization_constant(p)


def fitted_lambdas(service, settings, lam, seed, series=100, n=4712):
    """lambda-hat of independent MRW series (one stream each), T set to the series length"""
    truth = MrwParams(lam=lam, sigma=1.0, T=float(n), dt=1.0)
    simulator = MrwService(settings)
    values = np.concatenate([simulator.simulate_mrw(truth, n, seed, stream=s).returns for s in range(series)])
    layout = SampledSeries.synthetic(values, 1.0, n)
    estimates = service.fit_windows(layout, FIXED_COUNT, series, FitOptions(t_policy='window', dt=1.0),
                                    jobs=os.cpu_count() or 1)
    assert len(estimates.lambdas()) >= 0.95 * series
    return np.asarray(estimates.lambdas())


class TestJointDensity:

    def test_gradient_matches_finite_differences(self, service, rng):
        p = params()
        x, h = rng.standard_normal(5), 0.3 * rng.standard_normal(5)
        gradient = service.joint_log_density_gradient(x, h, p)
        eps = 1e-6
        numeric = np.array([
            (service.joint_log_density(x, h + eps * e, p) - service.joint_log_density(x, h - eps * e, p)) / (2 * eps)
            for e in np.eye(5)
        ])
        assert np.allclose(gradient, numeric, rtol=1e-5, atol=1e-6)

    def test_zero_lambda_prior_is_a_point_mass(self, service):
        p = params(lam=0.0)
        x = np.array([0.5, -1.0])
        assert service.joint_log_density(x, np.zeros(2), p) == pytest.approx(np.sum(stats.norm.logpdf(x)))
        assert service.joint_log_density(x, np.array([0.1, 0.0]), p) == -np.inf

    def test_shape_mismatch(self, service):
        with pytest.raises(ValidationError):
            service.joint_log_density(np.ones(3), np.zeros(2), params())

    def test_non_finite_returns(self, service):
        with pytest.raises(ValidationError):
            service.approx_log_likelihood(np.array([1.0, np.nan]), params())


class TestPosteriorMode:

    def test_gradient_vanishes_at_mode(self, service, rng):
        p = params(lam=0.5, T=32.0)
        x = rng.standard_normal(40)
        mode = service.posterior_mode(x, p)
        assert mode.gradient_norm < 1e-8
        assert np.max(np.abs(service.joint_log_density_gradient(x, mode.mode, p))) < 1e-6

    def test_warm_start_lands_on_same_mode(self, service, rng):
        p = params(lam=0.5, T=32.0)
        x = rng.standard_normal(40)
        cold = service.posterior_mode(x, p)
        warm = service.posterior_mode(x, p, initial=cold.mode + 0.1)
        assert np.allclose(warm.mode, cold.mode, atol=1e-7)

    def test_matches_grid_search(self, service):
        p = params(lam=0.6, T=6.0)
        x = np.array([0.3, -1.7])
        variance = variance_of(p)
        precision = np.linalg.inv(service.covariance_matrix(p, 2))

        def surface(h1, h2):
            data = sum(-0.5 * h - xi ** 2 * np.exp(-h) / (2 * variance) for xi, h in ((x[0], h1), (x[1], h2)))
            quadratic = precision[0, 0] * h1 ** 2 + 2 * precision[0, 1] * h1 * h2 + precision[1, 1] * h2 ** 2
            return data - 0.5 * quadratic

        def argmax(c1, c2, half_width, step):
            axis1 = np.arange(c1 - half_width, c1 + half_width + step / 2, step)
            axis2 = np.arange(c2 - half_width, c2 + half_width + step / 2, step)
            g1, g2 = np.meshgrid(axis1, axis2, indexing='ij')
            i, j = np.unravel_index(np.argmax(surface(g1, g2)), g1.shape)
            return g1[i, j], g2[i, j]

        coarse = argmax(0.0, 0.0, 5.0, 0.05)
        fine = argmax(*coarse, 0.06, 1e-4)
        assert np.allclose(service.posterior_mode(x, p).mode, fine, atol=1e-3)

    def test_zero_lambda(self, service):
        mode = service.posterior_mode(np.array([1.0, 2.0]), params(lam=0.0))
        assert np.array_equal(mode.mode, np.zeros(2))
        assert mode.log_det_b == 0.0


class TestLaplaceLikelihood:

    def test_exact_for_zero_lambda(self, service, rng):
        x = 1.7 * rng.standard_normal(30)
        value = service.approx_log_likelihood(x, params(lam=0.0, sigma=1.7))
        assert value == pytest.approx(np.sum(stats.norm.logpdf(x, scale=1.7)), rel=1e-12)

    def test_exact_for_zero_returns(self, service):
        # the integrand is Gaussian in h when every return vanishes
        p = params(lam=0.5, T=10.0)
        covariance = service.covariance_matrix(p, 3)
        expected = -1.5 * np.log(2 * np.pi * variance_of(p)) + covariance.sum() / 8.0
        assert service.approx_log_likelihood(np.zeros(3), p) == pytest.approx(expected, rel=1e-10)

    def test_agrees_with_quadrature(self, service):
        draws = np.random.default_rng(1234)
        for _ in range(100):
            n = int(draws.choice([2, 3]))
            p = params(lam=draws.uniform(0.05, 0.7), sigma=1.0, T=draws.uniform(2.0, 16.0))
            x = draws.standard_normal(n)
            oracle = service.quadrature_likelihood_oracle(x, p)
            assert service.approx_log_likelihood(x, p) == pytest.approx(oracle, rel=0.02, abs=0.02)

    def test_sigma_shift(self, service, rng):
        x = rng.standard_normal(20)
        base = service.approx_log_likelihood(x, params())
        scaled = service.approx_log_likelihood(3.0 * x, params(sigma=3.0))
        assert scaled == pytest.approx(base - 20 * np.log(3.0), rel=1e-9)


class TestQuadratureOracle:

    def test_single_zero_return(self, service):
        p = params(lam=0.5, T=4.0)
        s2 = service.covariance_matrix(p, 1)[0, 0]
        expected = -0.5 * np.log(2 * np.pi * variance_of(p)) + s2 / 8.0
        assert service.quadrature_likelihood_oracle(np.zeros(1), p) == pytest.approx(expected, rel=1e-8)

    def test_symmetries(self, service):
        p = params(lam=0.4, T=5.0)
        x = np.array([0.4, -1.1, 2.0])
        value = service.quadrature_likelihood_oracle(x, p)
        assert service.quadrature_likelihood_oracle(-x, p) == pytest.approx(value, rel=1e-12)
        assert service.quadrature_likelihood_oracle(x[::-1], p) == pytest.approx(value, rel=1e-6)

    def test_node_count_converged(self, service):
        p = params(lam=0.5, T=8.0)
        x = np.array([0.7, -0.2])
        assert service.quadrature_likelihood_oracle(x, p, nodes=40) == pytest.approx(
            service.quadrature_likelihood_oracle(x, p, nodes=80), rel=1e-4
        )

    def test_refuses_large_inputs(self, service):
        with pytest.raises(ValidationError):
            service.quadrature_likelihood_oracle(np.ones(5), params())
        with pytest.raises(ValidationError):
            service.quadrature_likelihood_oracle(np.ones(2), params(), nodes=20)


class TestFit:

    def test_scale_equivariance(self, service, settings):
        x = MrwService(settings).simulate_mrw(params(lam=0.4, T=100.0), 100, seed=21).returns
        options = FitOptions(restarts=1)
        base = service.fit_mrw(x, options)
        scaled = service.fit_mrw(5.0 * x, options)
        assert scaled.params.lam == pytest.approx(base.params.lam, rel=1e-6, abs=1e-8)
        assert scaled.params.sigma == pytest.approx(5.0 * base.params.sigma, rel=1e-6)
        assert scaled.log_likelihood == pytest.approx(base.log_likelihood - 100 * np.log(5.0), rel=1e-6)
        assert scaled.params.T == 100.0
        assert base.trace

    def test_mostly_zero_window(self, service):
        x = np.zeros(200)
        x[:50] = 1.0
        with pytest.raises(DegenerateWindowError):
            service.fit_mrw(x)

    def test_constant_window(self, service):
        x = np.full(120, 0.25)
        with pytest.raises(DegenerateWindowError):
            service.fit_mrw(x)

    def test_empty_window(self, service):
        with pytest.raises(EmptyWindowError):
            service.fit_mrw(np.zeros(0))

    def test_option_errors(self, service, rng):
        with pytest.raises(ValidationError):
            service.fit_mrw(rng.standard_normal(120), FitOptions(t_policy='guess'))
        with pytest.raises(ValidationError):
            service.fit_mrw(rng.standard_normal(120), FitOptions(t_policy='fixed'))

    @pytest.mark.slow
    def test_recovers_parameters(self, service, settings):
        truth = params(lam=0.5, sigma=2.0, T=2000.0)
        x = MrwService(settings).simulate_mrw(truth, 2000, seed=8).returns
        result = service.fit_mrw(x, FitOptions(t_policy='fixed', T=2000.0))
        assert result.converged
        assert result.params.lam == pytest.approx(0.5, abs=0.15)
        assert result.params.sigma == pytest.approx(2.0, rel=0.25)

    @pytest.mark.slow
    def test_lambda_recovered_over_many_series(self, service, settings):
        lambdas = fitted_lambdas(service, settings, lam=0.5, seed=31)
        assert 0.47 <= np.mean(lambdas) <= 0.53
        assert np.std(lambdas, ddof=1) < 0.05

    @pytest.mark.slow
    def test_zero_lambda_recovered_over_many_series(self, service, settings):
        lambdas = fitted_lambdas(service, settings, lam=0.0, seed=37)
        assert np.mean(lambdas < 0.1) >= 0.95


class TestWindows:

    def test_fixed_count(self, service, rng):
        series = SampledSeries.synthetic(rng.standard_normal(1200), 120.0, 100)
        windows = service.split_windows(series, FIXED_COUNT, 12)
        assert len(windows) == 12
        assert all(stop - start == 100 for start, stop in windows)

    def test_calendar_months(self, service, rng):
        series = SampledSeries.synthetic(rng.standard_normal(600), 120.0, 10)
        windows = service.split_windows(series, CALENDAR_MONTH)
        assert [stop - start for start, stop in windows] == [220, 210, 170]
        assert windows[0][0] == 0 and windows[-1][1] == 600

    def test_too_many_windows(self, service, rng):
        series = SampledSeries.synthetic(rng.standard_normal(10), 120.0, 10)
        with pytest.raises(EmptyWindowError):
            service.split_windows(series, FIXED_COUNT, 11)

    def test_failed_window_is_kept(self, service, rng, tmp_path):
        values = np.concatenate([rng.standard_normal(120), np.zeros(120)])
        series = SampledSeries.synthetic(values, 120.0, 40)
        estimates = service.fit_windows(series, FIXED_COUNT, 2, FitOptions(restarts=1))
        assert len(estimates) == 2
        assert not estimates.results[1].converged
        assert np.isnan(estimates.results[1].params.sigma)
        assert estimates.results[0].params.T == 120 * 120.0

        path = service.write_estimates(estimates, tmp_path / 'estimates.csv')
        back = service.read_estimates(path, dt=120.0)
        assert [r.converged for r in back.results] == [r.converged for r in estimates.results]
        assert back.results[0].params.lam == estimates.results[0].params.lam
        assert back.results[0].window == estimates.results[0].window
