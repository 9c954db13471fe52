from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.models.mrw import MrwParams


@dataclass
class RangeDistribution:
    ensemble_size: int
    segment_count: int
    ranges: np.ndarray
    null_params: MrwParams
    seed: int = 0
    failures: int = 0
    sample_curves: List[np.ndarray] = field(default_factory=list)

    def quantile(self, level) -> float:
        return float(np.quantile(self.ranges, level))

    def to_dict(self):
        return {
            'ensemble_size': self.ensemble_size,
            'segment_count': self.segment_count,
            'failures': self.failures,
            'seed': self.seed,
            'null_params': self.null_params.to_dict(),
            'q025': self.quantile(0.025),
            'q975': self.quantile(0.975)
        }


@dataclass
class SignificanceReport:
    observed_range: float
    p_value: float
    percentile_band: tuple
    ensemble_size: int
    note: Optional[str] = None

    def to_dict(self):
        report = {
            'observed_range': self.observed_range,
            'p_value': self.p_value,
            'q025': self.percentile_band[0],
            'q975': self.percentile_band[1],
            'ensemble_size': self.ensemble_size
        }
        if self.note:
            report['p_value_note'] = self.note
        return report
