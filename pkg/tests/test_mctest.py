import os

import numpy as np
import pytest
from scipy import stats

from src.errors import EnsembleError, SegmentFitError, SegmentMismatchError, ValidationError
from src.models.estimates import FIXED_COUNT, EstimateSeries, FitResult
from src.models.mrw import MrwParams
from src.models.significance import RangeDistribution
from src.services import mctest_service as mctest_module
from src.services.mctest_service import (
    WHOLE_SERIES_SOURCE, WINDOW_MEAN_SOURCE, McTestService, range_of_estimates
)


@pytest.fixture
def service(settings):
    return McTestService(settings)


NULL = MrwParams(lam=0.3, sigma=1.0, T=100.0, dt=1.0)


def distribution(ranges, segments=12):
    ranges = np.sort(np.asarray(ranges, dtype=float))
    return RangeDistribution(len(ranges), segments, ranges, NULL)


def estimates(lambdas, converged=None):
    converged = converged or [True] * len(lambdas)
    return EstimateSeries(
        results=[
            FitResult(params=MrwParams(lam, 1.0, 100.0, 1.0), log_likelihood=-1.0, n=100, converged=ok, iterations=1)
            for lam, ok in zip(lambdas, converged)
        ],
        window_rule=FIXED_COUNT
    )


class TestRange:

    def test_range(self):
        assert range_of_estimates([0.2, 0.5, 0.3]) == pytest.approx(0.3)
        assert range_of_estimates([0.4]) == 0.0

    def test_empty(self):
        with pytest.raises(ValidationError):
            range_of_estimates([])

    def test_single_segment(self, service, rng):
        assert service.segment_ranges(rng.standard_normal(50), 1) == 0.0

    def test_identical_segments(self, service, rng):
        segment = rng.standard_normal(120)
        lambdas = service.segment_lambdas(np.tile(segment, 3), 3)
        assert len(lambdas) == 3
        assert range_of_estimates(lambdas) == 0.0

    def test_too_many_segments(self, service):
        with pytest.raises(ValidationError):
            service.segment_lambdas(np.ones(3), 4)

    def test_degenerate_segment(self, service, rng):
        path = np.concatenate([rng.standard_normal(120), np.zeros(120)])
        with pytest.raises(SegmentFitError) as caught:
            service.segment_lambdas(path, 2)
        assert caught.value.segment_index == 1


class TestSignificance:

    def test_zero_observed_range(self, service):
        report = service.significance_of_range(0.0, distribution(np.linspace(0.0, 0.5, 200)))
        assert report.p_value == 1.0
        assert report.note is None

    def test_upper_tail(self, service):
        dist = distribution(np.arange(1, 101) / 100.0)
        report = service.significance_of_range(0.905, dist)
        assert report.p_value == pytest.approx(0.10)
        assert report.percentile_band[0] < report.percentile_band[1]

    def test_beyond_every_null_range(self, service):
        report = service.significance_of_range(2.0, distribution(np.linspace(0.0, 0.5, 500)))
        assert report.p_value == 0.0
        assert report.note == '< 1/500'
        assert report.to_dict()['p_value_note'] == '< 1/500'

    def test_segment_mismatch(self, service):
        with pytest.raises(SegmentMismatchError):
            service.significance_test(estimates([0.3, 0.4]), distribution([0.1, 0.2], segments=12))

    def test_observed_range_from_converged_windows(self, service):
        observed = estimates([0.2, 0.9, 0.5], converged=[True, False, True])
        report = service.significance_test(observed, distribution([0.1, 0.2, 0.4], segments=3))
        assert report.observed_range == pytest.approx(0.3)
        assert report.p_value == pytest.approx(1.0 / 3.0)

    def test_null_lambda_from_window_mean(self, service):
        lam, source = service.default_null_lambda(estimates([0.41, 0.47, 0.5]))
        assert lam == pytest.approx(0.45)
        assert source == WINDOW_MEAN_SOURCE
        with pytest.raises(ValidationError):
            service.default_null_lambda(estimates([0.4], converged=[False]))

    def test_null_lambda_prefers_whole_series(self, service, rng):
        returns = rng.standard_normal(8192)
        lam, source = service.default_null_lambda(estimates([0.61, 0.67, 0.7]), returns)
        assert source == WHOLE_SERIES_SOURCE
        assert lam <= 0.15
        assert lam == pytest.approx(round(lam / 0.05) * 0.05)

    def test_null_lambda_needs_some_input(self, service):
        with pytest.raises(ValidationError):
            service.default_null_lambda()

    def test_rounded_null_lambda(self, service):
        assert service.rounded_null_lambda(0.512) == pytest.approx(0.5)
        assert service.rounded_null_lambda(0.526) == pytest.approx(0.55)
        assert service.rounded_null_lambda(1.7) == 1.0


class TestNullEnsemble:

    def test_deterministic(self, service):
        first = service.build_null_distribution(NULL, 200, 2, 3, seed=5)
        second = service.build_null_distribution(NULL, 200, 2, 3, seed=5)
        assert first.ensemble_size == 3
        assert np.array_equal(first.ranges, second.ranges)
        assert np.all(np.diff(first.ranges) >= 0)
        assert len(first.sample_curves) == 3
        frame = service.curves_frame(first)
        assert list(frame.columns) == ['member', 'segment', 'lambda']
        assert len(frame) == 6

    def test_all_members_failing(self, service, monkeypatch):
        def fail(self, path, segment_count, dt=1.0):
            raise SegmentFitError(0, 'no convergence')

        monkeypatch.setattr(mctest_module.McTestService, 'segment_lambdas', fail)
        with pytest.raises(EnsembleError):
            service.build_null_distribution(NULL, 50, 2, 4, seed=1)

    def test_invalid_null(self, service):
        with pytest.raises(ValidationError):
            service.build_null_distribution(MrwParams(1.5, 1.0, 100.0, 1.0), 50, 2, 4, seed=1)

    def test_frames(self, service):
        dist = distribution([0.3, 0.1, 0.2], segments=3)
        frame = service.distribution_frame(dist)
        assert frame['rank'].tolist() == [1, 2, 3]
        assert frame['range'].tolist() == [0.1, 0.2, 0.3]
        values = service.report_values(service.significance_of_range(0.15, dist), dist)
        assert values['null_lambda'] == 0.3
        assert values['p_value'] == pytest.approx(2.0 / 3.0)


#: twelve months of two-minute returns, T fixed to a month
YEAR_LENGTH = 56544
YEAR_NULL = MrwParams(lam=0.5, sigma=1.0, T=4712 * 120.0, dt=120.0)


def workers():
    return os.cpu_count() or 1


class TestNullCalibration:

    @pytest.mark.slow
    def test_year_of_two_minute_returns(self, service):
        dist = service.build_null_distribution(YEAR_NULL, YEAR_LENGTH, 12, 200, seed=2008, jobs=workers())
        assert dist.failures == 0
        assert dist.quantile(0.025) == pytest.approx(0.04, abs=0.01)
        assert dist.quantile(0.975) == pytest.approx(0.12, abs=0.01)
        assert service.significance_of_range(0.19, dist).p_value < 0.025

    @pytest.mark.slow
    def test_zero_lambda_null_is_narrower(self, service):
        intermittent = MrwParams(lam=0.5, sigma=1.0, T=1000.0, dt=1.0)
        flat = MrwParams(lam=0.0, sigma=1.0, T=1000.0, dt=1.0)
        wide = service.build_null_distribution(intermittent, 4000, 4, 100, seed=11, jobs=workers())
        narrow = service.build_null_distribution(flat, 4000, 4, 100, seed=11, jobs=workers())
        assert np.median(narrow.ranges) < np.median(wide.ranges)

    @pytest.mark.slow
    def test_p_values_of_null_paths_are_uniform(self, service):
        null = MrwParams(lam=0.5, sigma=1.0, T=500.0, dt=1.0)
        reference = service.build_null_distribution(null, 2000, 4, 200, seed=41, jobs=workers())
        replications = service.build_null_distribution(null, 2000, 4, 200, seed=43, jobs=workers())
        p_values = [service.significance_of_range(r, reference).p_value for r in replications.ranges]
        assert stats.kstest(p_values, 'uniform').pvalue > 0.05
