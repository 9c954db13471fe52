"""
Monte Carlo Test Service
Null ensemble of constant-parameter MRW paths and the range-of-estimates test
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import get_config
from src.errors import ComputationError, EnsembleError, SegmentFitError, SegmentMismatchError, ValidationError
from src.models.estimates import EstimateSeries
from src.models.mrw import MrwParams
from src.models.significance import RangeDistribution, SignificanceReport
from src.services.mle_service import FitOptions, MleService
from src.services.mrw_service import MrwService
from src.services.scaling_service import ScalingService

logger = logging.getLogger(__name__)

#: ensemble members whose per-segment lambda curves are kept for plotting
SAMPLE_CURVES = 5

# where a defaulted null lambda came from
GIVEN_SOURCE = 'given'
WHOLE_SERIES_SOURCE = 'whole-series scaling fit'
WINDOW_MEAN_SOURCE = 'mean of window estimates'


def range_of_estimates(lambdas: Sequence[float]) -> float:
    """max - min of the estimates; 0 for a single estimate"""
    lambdas = np.asarray(lambdas, dtype=float)
    if len(lambdas) == 0:
        raise ValidationError("no estimates to take a range of")
    return float(lambdas.max() - lambdas.min())


class McTestService:
    """Service for the Monte Carlo significance test of time-varying lambda"""

    def __init__(self, settings=None):
        self.settings = settings or get_config()

    def segment_lambdas(self, path, segment_count: int, dt: float = 1.0) -> np.ndarray:
        """lambda-hat per equal-count segment; T is fixed to each segment's length"""
        values = np.asarray(path, dtype=float)
        if segment_count < 1:
            raise ValidationError("segment_count must be at least 1")
        if segment_count > len(values):
            raise ValidationError(f"{len(values)} points cannot form {segment_count} segments")

        mle = MleService(self.settings)
        lambdas = []
        for index, segment in enumerate(np.array_split(values, segment_count)):
            options = FitOptions(t_policy='fixed', T=len(segment) * dt, dt=dt)
            try:
                result = mle.fit_mrw(segment, options)
            except ComputationError as e:
                raise SegmentFitError(index, e)
            if not result.converged:
                raise SegmentFitError(index, result.message or 'optimizer did not converge')
            lambdas.append(result.params.lam)
        return np.array(lambdas)

    def segment_ranges(self, path, segment_count: int, dt: float = 1.0) -> float:
        if segment_count == 1:
            return 0.0
        return range_of_estimates(self.segment_lambdas(path, segment_count, dt))

    def build_null_distribution(self, null_params: MrwParams, n: int, segment_count: int,
                                ensemble_size: int, seed: int, jobs: int = 1) -> RangeDistribution:
        """
        Simulate ensemble_size independent paths (member i uses stream i of the
        seed) and collect the segment range of each. Failed members are counted;
        more than ENSEMBLE_FAILURE_LIMIT of them aborts the ensemble.
        """
        null_params.validate(self.settings.LAMBDA_MAX)
        if ensemble_size < 1:
            raise ValidationError("ensemble_size must be at least 1")
        if ensemble_size < self.settings.ENSEMBLE_MIN_SIZE:
            logger.warning(f"Ensemble of {ensemble_size} paths is below {self.settings.ENSEMBLE_MIN_SIZE}; "
                           "quantiles will be unstable")

        tasks = [(self.settings, null_params, n, segment_count, seed, member) for member in range(ensemble_size)]
        if jobs and jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                outcomes = list(executor.map(_ensemble_member_task, tasks, chunksize=max(1, ensemble_size // (4 * jobs))))
        else:
            outcomes = [_ensemble_member_task(task) for task in tasks]

        ranges = np.array([r for r, _ in outcomes if r is not None])
        failures = ensemble_size - len(ranges)
        if failures > self.settings.ENSEMBLE_FAILURE_LIMIT * ensemble_size:
            raise EnsembleError(f"{failures} of {ensemble_size} ensemble members failed")
        if failures:
            logger.warning(f"{failures} of {ensemble_size} ensemble members failed and were left out")

        curves = [curve for _, curve in outcomes if curve is not None][:SAMPLE_CURVES]
        logger.info(f"Null ensemble of {len(ranges)} ranges: median {np.median(ranges):.4f}")
        return RangeDistribution(
            ensemble_size=len(ranges),
            segment_count=segment_count,
            ranges=np.sort(ranges),
            null_params=null_params,
            seed=int(seed),
            failures=failures,
            sample_curves=curves
        )

    @staticmethod
    def significance_of_range(observed_range: float, dist: RangeDistribution) -> SignificanceReport:
        """Upper-tail proportion of null ranges at or above the observed range"""
        if dist.ensemble_size == 0:
            raise EnsembleError("null distribution is empty")
        p_value = float(np.mean(dist.ranges >= observed_range))
        note = f"< 1/{dist.ensemble_size}" if p_value == 0.0 else None
        return SignificanceReport(
            observed_range=float(observed_range),
            p_value=p_value,
            percentile_band=(dist.quantile(0.025), dist.quantile(0.975)),
            ensemble_size=dist.ensemble_size,
            note=note
        )

    def significance_test(self, observed: EstimateSeries, dist: RangeDistribution) -> SignificanceReport:
        if len(observed) != dist.segment_count:
            raise SegmentMismatchError(
                f"observed series has {len(observed)} windows, null distribution {dist.segment_count} segments"
            )
        lambdas = observed.lambdas()
        if len(lambdas) < len(observed):
            logger.warning(f"{len(observed) - len(lambdas)} observed windows did not converge; "
                           "range taken over the converged ones")
        return self.significance_of_range(range_of_estimates(lambdas), dist)

    def rounded_null_lambda(self, lam: float) -> float:
        step = self.settings.NULL_LAMBDA_GRANULARITY
        return float(np.clip(round(float(lam) / step) * step, 0.0, self.settings.LAMBDA_MAX))

    def whole_series_lambda(self, returns) -> float:
        """lambda of the whole return series from the wavelet scaling-function fit"""
        returns = np.asarray(returns, dtype=float)
        if len(returns) < 2:
            raise ValidationError("whole-series lambda needs at least 2 returns")
        scaling = ScalingService(self.settings)
        path = np.concatenate([[0.0], np.cumsum(returns)])
        structure = scaling.wavelet_structure_functions(path)
        fit = scaling.fit_lambda_to_zeta(scaling.fit_scaling_function(structure))
        if fit.degenerate:
            logger.warning(f"Whole-series scaling fit is degenerate (lambda^2={fit.lambda_squared:.4g}); using 0")
        return fit.lam

    def default_null_lambda(self, observed: Optional[EstimateSeries] = None, returns=None) -> Tuple[float, str]:
        """
        Null lambda rounded to the null granularity, with the source it came from.

        The whole-series estimate is used when the returns are available;
        the mean of the converged window estimates is the fallback.
        """
        if returns is not None:
            return self.rounded_null_lambda(self.whole_series_lambda(returns)), WHOLE_SERIES_SOURCE
        if observed is None:
            raise ValidationError("a null lambda needs the returns or the window estimates")
        lambdas = observed.lambdas()
        if len(lambdas) == 0:
            raise ValidationError("no converged estimates to derive a null lambda from")
        return self.rounded_null_lambda(np.mean(lambdas)), WINDOW_MEAN_SOURCE

    @staticmethod
    def distribution_frame(dist: RangeDistribution) -> pd.DataFrame:
        return pd.DataFrame({'rank': np.arange(1, dist.ensemble_size + 1), 'range': dist.ranges})

    @staticmethod
    def curves_frame(dist: RangeDistribution) -> pd.DataFrame:
        rows = [
            {'member': member, 'segment': segment + 1, 'lambda': lam}
            for member, curve in enumerate(dist.sample_curves)
            for segment, lam in enumerate(curve)
        ]
        return pd.DataFrame(rows, columns=['member', 'segment', 'lambda'])

    @staticmethod
    def report_values(report: SignificanceReport, dist: Optional[RangeDistribution] = None) -> dict:
        values = report.to_dict()
        if dist is not None:
            values.update({
                'segment_count': dist.segment_count,
                'failures': dist.failures,
                'seed': dist.seed,
                'null_lambda': dist.null_params.lam,
                'null_sigma': dist.null_params.sigma,
                'null_T_seconds': dist.null_params.T,
                'null_dt_seconds': dist.null_params.dt
            })
        return values


def _ensemble_member_task(task):
    settings, null_params, n, segment_count, seed, member = task
    path = MrwService(settings).simulate_mrw(null_params, n, seed, stream=member, keep_log_volatility=False)
    service = McTestService(settings)
    try:
        lambdas = service.segment_lambdas(path.returns, segment_count, null_params.dt)
    except ComputationError as e:
        logger.warning(f"Ensemble member {member} failed: {e}")
        return None, None
    return range_of_estimates(lambdas), lambdas


# Global instance for use across the application
mctest_service = McTestService()
