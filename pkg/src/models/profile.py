from dataclasses import dataclass

import numpy as np

MEAN_ABSOLUTE = 'mean-absolute'
MEAN = 'mean'
PROFILE_STATISTICS = (MEAN_ABSOLUTE, MEAN)


@dataclass
class SeasonalProfile:
    """Per time-of-day bucket statistic of intraday returns"""
    bucket_count: int
    values: np.ndarray
    statistic: str
    counts: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def scaled(self, factor) -> 'SeasonalProfile':
        return SeasonalProfile(self.bucket_count, self.values * factor, self.statistic, self.counts)

    @property
    def flatness(self) -> float:
        """max/min bucket ratio; 1 for a perfectly flat profile"""
        return float(np.max(self.values) / np.min(self.values))

    def to_dict(self):
        return {
            'bucket_count': self.bucket_count,
            'statistic': self.statistic,
            'min': float(np.min(self.values)),
            'max': float(np.max(self.values))
        }
