from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

WAVELET = 'wavelet'
DIFFERENCE = 'difference'


@dataclass
class AcfResult:
    lags: np.ndarray
    values: np.ndarray
    band: float
    n: int

    def fraction_inside_band(self, skip_zero=True) -> float:
        values = self.values[1:] if skip_zero else self.values
        return float(np.mean(np.abs(values) <= self.band))

    def to_dict(self):
        return {'max_lag': int(self.lags[-1]), 'band': self.band, 'n': self.n}


@dataclass
class Spectrum:
    frequency: np.ndarray
    power: np.ndarray
    segments: int

    def to_dict(self):
        return {'bins': len(self.frequency), 'segments': self.segments}


@dataclass
class StructureFunctions:
    method: str
    q_grid: np.ndarray
    scales: np.ndarray
    moments: np.ndarray
    fit_range: Tuple[float, float]

    def with_fit_range(self, low, high) -> 'StructureFunctions':
        return StructureFunctions(self.method, self.q_grid, self.scales, self.moments, (low, high))

    def to_dict(self):
        return {
            'method': self.method,
            'q_count': len(self.q_grid),
            'scale_count': len(self.scales),
            'fit_range': list(self.fit_range)
        }


@dataclass
class ScalingReport:
    q_grid: np.ndarray
    zeta_hat: np.ndarray
    stderr: np.ndarray
    r2: np.ndarray
    method: str = WAVELET

    def to_dict(self):
        return {
            'method': self.method,
            'q': self.q_grid.tolist(),
            'zeta': self.zeta_hat.tolist()
        }


@dataclass
class LambdaFit:
    """Intermittency obtained from a least-squares fit of the MRW scaling function"""
    lam: float
    degenerate: bool
    lambda_squared: float
    residual: Optional[float] = None

    def to_dict(self):
        return {
            'lambda': self.lam,
            'lambda_squared': self.lambda_squared,
            'degenerate': self.degenerate,
            'residual': self.residual
        }
