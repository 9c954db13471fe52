from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import ValidationError


@dataclass(frozen=True)
class MrwParams:
    """
    Parameter vector (lambda, sigma, T) of the multifractal random walk plus
    the grid spacing dt. sigma is per sqrt(grid step); T and dt in seconds.
    """
    lam: float
    sigma: float
    T: float
    dt: float

    def validate(self, lambda_max=1.0) -> 'MrwParams':
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.dt <= 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.T < self.dt:
            raise ValidationError(f"T ({self.T}) must not be shorter than dt ({self.dt})")
        if not 0 <= self.lam <= lambda_max:
            raise ValidationError(f"lambda must lie in [0, {lambda_max}], got {self.lam}")
        return self

    @property
    def correlation_steps(self) -> float:
        return self.T / self.dt

    def to_dict(self):
        return {
            'lambda': self.lam,
            'sigma': self.sigma,
            'T_seconds': self.T,
            'dt_seconds': self.dt
        }


@dataclass
class MrwPath:
    returns: np.ndarray
    params: MrwParams
    seed: int
    stream: int = 0
    log_volatility: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.returns)

    def cumulative(self) -> np.ndarray:
        """Log-price path X(t) with X(0) = 0"""
        return np.concatenate([[0.0], np.cumsum(self.returns)])

    def to_dict(self):
        return {
            'n': len(self.returns),
            'seed': self.seed,
            'stream': self.stream,
            'params': self.params.to_dict()
        }
