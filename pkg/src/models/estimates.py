from dataclasses import dataclass, field
from datetime import datetime
from typing import List, Optional, Tuple

import numpy as np

from src.models.mrw import MrwParams

CALENDAR_MONTH = 'calendar-month'
CALENDAR_YEAR = 'calendar-year'
FIXED_COUNT = 'fixed-count'
WINDOW_RULES = (CALENDAR_MONTH, CALENDAR_YEAR, FIXED_COUNT)


@dataclass
class FitResult:
    params: MrwParams
    log_likelihood: float
    n: int
    converged: bool
    iterations: int
    window: Tuple[Optional[datetime], Optional[datetime]] = (None, None)
    trace: List[float] = field(default_factory=list)
    message: str = ''

    def to_dict(self):
        start, end = self.window
        return {
            'window_start': start.isoformat() if start else None,
            'window_end': end.isoformat() if end else None,
            'n': self.n,
            'lambda': self.params.lam,
            'sigma': self.params.sigma,
            'T_seconds': self.params.T,
            'loglik': self.log_likelihood,
            'converged': self.converged
        }


@dataclass
class EstimateSeries:
    results: List[FitResult]
    window_rule: str

    def __len__(self):
        return len(self.results)

    def lambdas(self, converged_only=True) -> np.ndarray:
        return np.array([
            r.params.lam for r in self.results if r.converged or not converged_only
        ])

    def sigmas(self, converged_only=True) -> np.ndarray:
        return np.array([
            r.params.sigma for r in self.results if r.converged or not converged_only
        ])

    def to_dict(self):
        return {
            'window_rule': self.window_rule,
            'windows': [r.to_dict() for r in self.results]
        }
