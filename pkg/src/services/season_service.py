"""
Season Service
Intraday seasonal profiles and deseasonalization of sampled returns
"""

import logging
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from src.config import get_config
from src.errors import DegenerateProfileError, ProfileError, ValidationError
from src.models.profile import MEAN, MEAN_ABSOLUTE, PROFILE_STATISTICS, SeasonalProfile
from src.models.quotes import SampledSeries
from src.services.artifact_service import write_csv

logger = logging.getLogger(__name__)

MEAN_PASS_MODES = ('subtract', 'divide', 'none')


class SeasonService:
    """Service for estimating and removing one-day periodicity"""

    def __init__(self, settings=None):
        self.settings = settings or get_config()

    def fit_profile(self, returns: SampledSeries, statistic: str = MEAN_ABSOLUTE,
                    smoothing: Optional[int] = None) -> SeasonalProfile:
        """
        Average a statistic of the returns over all days for each time-of-day bucket.

        Args:
            returns: sampled return series
            statistic: 'mean-absolute' (volatility smile) or 'mean'
            smoothing: centred moving-average width in buckets, 0/None for none
        """
        if statistic not in PROFILE_STATISTICS:
            raise ValidationError(f"Unknown profile statistic '{statistic}'")
        if returns.n_days < 2:
            raise ProfileError("a seasonal profile needs at least 2 days")

        buckets = returns.buckets()
        if buckets.max() >= returns.bucket_count or buckets.min() < 0:
            raise ProfileError("series buckets fall outside the declared bucket structure")
        observed = np.abs(returns.values) if statistic == MEAN_ABSOLUTE else returns.values

        counts = np.bincount(buckets, minlength=returns.bucket_count)
        if np.any(counts == 0):
            empty = np.flatnonzero(counts == 0).tolist()
            raise ProfileError(f"buckets without observations: {empty}")
        values = np.bincount(buckets, weights=observed, minlength=returns.bucket_count) / counts

        smoothing = self.settings.PROFILE_SMOOTHING_WIDTH if smoothing is None else smoothing
        if smoothing and smoothing > 1:
            values = pd.Series(values).rolling(smoothing, center=True, min_periods=1).mean().to_numpy()

        if statistic == MEAN_ABSOLUTE and np.any(values <= 0):
            raise DegenerateProfileError(
                f"mean-absolute profile is zero at buckets {np.flatnonzero(values <= 0).tolist()}"
            )

        logger.debug(f"Fitted {statistic} profile over {returns.n_days} days and {returns.bucket_count} buckets")
        return SeasonalProfile(returns.bucket_count, values, statistic, counts)

    @staticmethod
    def deseasonalize(returns: SampledSeries, profile: SeasonalProfile) -> SampledSeries:
        """x_t = y_t / profile[bucket(t)]"""
        if profile.statistic != MEAN_ABSOLUTE:
            raise ProfileError("deseasonalize needs a mean-absolute profile")
        if profile.bucket_count != returns.bucket_count:
            raise ProfileError(
                f"profile has {profile.bucket_count} buckets, series has {returns.bucket_count}"
            )
        if np.any(profile.values == 0):
            raise DegenerateProfileError("division by a zero profile value")
        return returns.with_values(returns.values / profile.values[returns.buckets()])

    def deseasonalize_mean(self, returns: SampledSeries, mode: Optional[str] = None) -> SampledSeries:
        """
        Second pass against the weak periodicity left in the mean.

        'subtract' centres every bucket on zero; 'divide' normalises by the
        per-bucket mean and refuses buckets whose mean is numerically zero.
        """
        mode = mode or self.settings.MEAN_PASS_MODE
        if mode not in MEAN_PASS_MODES:
            raise ValidationError(f"Unknown mean pass mode '{mode}'")
        if mode == 'none':
            return returns

        profile = self.fit_profile(returns, MEAN, smoothing=0)
        means = profile.values[returns.buckets()]
        if mode == 'subtract':
            return returns.with_values(returns.values - means)

        scale = np.max(np.abs(returns.values)) or 1.0
        if np.any(np.abs(profile.values) <= 1e-12 * scale):
            raise DegenerateProfileError("per-bucket mean is numerically zero; cannot divide")
        return returns.with_values(returns.values / means)

    def run_pipeline(self, returns: SampledSeries, mean_pass: Optional[str] = None,
                     smoothing: Optional[int] = None):
        """Volatility pass followed by the mean pass; returns (x, volatility profile, mean profile)"""
        profile = self.fit_profile(returns, MEAN_ABSOLUTE, smoothing=smoothing)
        deseasonalized = self.deseasonalize(returns, profile)
        mean_profile = self.fit_profile(deseasonalized, MEAN, smoothing=0)
        deseasonalized = self.deseasonalize_mean(deseasonalized, mean_pass)
        logger.info(f"Deseasonalized {len(returns)} returns (smile max/min {profile.flatness:.3f})")
        return deseasonalized, profile, mean_profile

    @staticmethod
    def profile_frame(profile: SeasonalProfile, grid_step: float, session_open,
                      stamp_interval_end=True) -> pd.DataFrame:
        """Rows for the `bucket,time_of_day,value` CSV"""
        shift = 1 if stamp_interval_end else 0
        origin = datetime.combine(datetime(2000, 1, 1).date(), session_open)
        times = [
            (origin + timedelta(seconds=float((b + shift) * grid_step))).time().isoformat()
            for b in range(profile.bucket_count)
        ]
        return pd.DataFrame({
            'bucket': np.arange(profile.bucket_count),
            'time_of_day': times,
            'value': profile.values
        })

    def write_profile(self, profile: SeasonalProfile, grid_step, session_open, path) -> Path:
        return write_csv(self.profile_frame(profile, grid_step, session_open), path)


# Global instance for use across the application
season_service = SeasonService()
