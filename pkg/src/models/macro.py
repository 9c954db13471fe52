from dataclasses import dataclass, field
from datetime import date
from typing import List, Optional

import numpy as np

MONTHLY = 'monthly'
ANNUAL = 'annual'
AGGREGATION_RULES = (MONTHLY, ANNUAL)


@dataclass
class YieldSeries:
    dates: List[date]
    rates: np.ndarray
    source: str = ''

    def to_dict(self):
        return {'source': self.source, 'observations': len(self.dates)}


@dataclass
class SpreadSeries:
    dates: List[date]
    spread: np.ndarray
    sources: List[str] = field(default_factory=list)

    def to_dict(self):
        return {'sources': self.sources, 'observations': len(self.dates)}


@dataclass
class AggregatedSeries:
    """Arithmetic means per calendar bucket ('2008-01' or '2008')"""
    rule: str
    buckets: List[str]
    values: np.ndarray
    counts: np.ndarray

    def to_dict(self):
        return dict(zip(self.buckets, self.values.tolist()))


@dataclass
class ComparisonReport:
    pearson: float
    bucket_count: int
    buckets: List[str]
    lambda_means: np.ndarray
    spread_means: np.ndarray
    p_value: Optional[float] = None
    sources: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'pearson': self.pearson,
            'buckets': self.bucket_count,
            'p_value': self.p_value,
            'sources': self.sources
        }
