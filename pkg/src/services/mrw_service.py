"""
MRW Service
Multifractal random walk: log-volatility covariance, normalization,
theoretical scaling function and exact simulation
"""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from src.config import get_config
from src.errors import CovarianceFactorizationError, ValidationError
from src.models.mrw import MrwParams, MrwPath
from src.services.artifact_service import read_key_values, write_csv, write_key_values

logger = logging.getLogger(__name__)

# substreams of one (seed, stream) pair
LOG_VOLATILITY_STREAM = 0
NOISE_STREAM = 1


def random_generator(seed: int, stream: int = 0, substream: int = 0) -> np.random.Generator:
    """Counter-based generator addressed by (seed, stream, substream)"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(substream)))
    return np.random.Generator(np.random.Philox(sequence))


class MrwService:
    """Service for the MRW model and its simulation"""

    def __init__(self, settings=None):
        self.settings = settings or get_config()

    @staticmethod
    def log_vol_covariance(params: MrwParams, lag):
        """lambda^2 * log+( T / ((lag + 1) dt) ); accepts a scalar or an array of lags"""
        lags = np.asarray(lag, dtype=float)
        if np.any(lags < 0):
            raise ValidationError("lag must be non-negative")
        covariance = params.lam ** 2 * np.maximum(np.log(params.correlation_steps / (lags + 1.0)), 0.0)
        return float(covariance) if covariance.ndim == 0 else covariance

    def normalization_constant(self, params: MrwParams) -> float:
        """c = exp(-Var(h)/2) so that E[c e^h] = 1"""
        return float(np.exp(-0.5 * self.log_vol_covariance(params, 0)))

    @staticmethod
    def theoretical_zeta(lam, q):
        """zeta(q) = (1 + lambda^2/2) q/2 - lambda^2 q^2/8"""
        q = np.asarray(q, dtype=float)
        zeta = (1.0 + lam ** 2 / 2.0) * q / 2.0 - lam ** 2 * q ** 2 / 8.0
        return float(zeta) if zeta.ndim == 0 else zeta

    def simulate_log_volatility(self, params: MrwParams, n: int, seed: int, stream: int = 0) -> np.ndarray:
        """
        Exact draw of the stationary Gaussian log-volatility vector.

        Circulant embedding is tried first; an embedding with eigenvalues below
        -tol * max falls back to the Levinson-Durbin innovations recursion.
        """
        if n < 1:
            raise ValidationError("n must be at least 1")
        covariance = self.log_vol_covariance(params, np.arange(n))
        rng = random_generator(seed, stream, LOG_VOLATILITY_STREAM)

        if covariance[0] == 0.0:
            return np.zeros(n)
        if n == 1:
            return np.sqrt(covariance[0]) * rng.standard_normal(1)

        sample = self._circulant_sample(covariance, rng)
        if sample is None:
            logger.warning(f"Circulant embedding not non-negative for n={n}; using Levinson recursion")
            sample = self._levinson_sample(covariance, rng)
        return sample

    def _circulant_sample(self, covariance, rng) -> Optional[np.ndarray]:
        n = len(covariance)
        row = np.concatenate([covariance, covariance[-2:0:-1]])
        m = len(row)
        eigenvalues = np.fft.fft(row).real
        tolerance = self.settings.CIRCULANT_TOLERANCE * eigenvalues.max()
        if eigenvalues.min() < -tolerance:
            return None
        eigenvalues = np.clip(eigenvalues, 0.0, None)
        noise = rng.standard_normal((2, m))
        field = np.fft.fft(np.sqrt(eigenvalues / m) * (noise[0] + 1j * noise[1]))
        return field.real[:n]

    @staticmethod
    def _levinson_sample(covariance, rng) -> np.ndarray:
        n = len(covariance)
        innovations = rng.standard_normal(n)
        sample = np.zeros(n)
        variance = covariance[0]
        sample[0] = np.sqrt(variance) * innovations[0]
        coefficients = np.zeros(0)
        for t in range(1, n):
            reflection = (covariance[t] - coefficients @ covariance[t - 1:0:-1]) / variance
            coefficients = np.concatenate([coefficients - reflection * coefficients[::-1], [reflection]])
            variance *= (1.0 - reflection ** 2)
            if variance <= 0:
                raise CovarianceFactorizationError(
                    f"Toeplitz covariance is not positive definite at step {t}: "
                    "circulant embedding and Levinson-Durbin fallback both failed"
                )
            sample[t] = coefficients @ sample[t - 1::-1] + np.sqrt(variance) * innovations[t]
        return sample

    def simulate_mrw(self, params: MrwParams, n: int, seed: int, stream: int = 0,
                     keep_log_volatility: bool = True) -> MrwPath:
        """x_t = sigma * sqrt(c e^{h_t}) * eps_t with eps drawn from its own substream"""
        params.validate(self.settings.LAMBDA_MAX)
        log_volatility = self.simulate_log_volatility(params, n, seed, stream)
        noise = random_generator(seed, stream, NOISE_STREAM).standard_normal(n)
        volatility = np.sqrt(self.normalization_constant(params) * np.exp(log_volatility))
        returns = params.sigma * (volatility * noise)
        return MrwPath(
            returns=returns,
            params=params,
            seed=int(seed),
            stream=int(stream),
            log_volatility=log_volatility if keep_log_volatility else None
        )

    @staticmethod
    def path_frame(path: MrwPath) -> pd.DataFrame:
        frame = pd.DataFrame({'index': np.arange(len(path)), 'x': path.returns})
        if path.log_volatility is not None:
            frame['h'] = path.log_volatility
        return frame

    def write_path(self, path: MrwPath, destination) -> Path:
        return write_csv(self.path_frame(path), destination)

    @staticmethod
    def write_params(params: MrwParams, destination) -> Path:
        return write_key_values(params.to_dict(), destination)

    def read_params(self, source) -> MrwParams:
        values = read_key_values(source)
        try:
            params = MrwParams(
                lam=float(values['lambda']),
                sigma=float(values['sigma']),
                T=float(values['T_seconds']),
                dt=float(values['dt_seconds'])
            )
        except KeyError as e:
            raise ValidationError(f"{source}: missing parameter {e}")
        except ValueError as e:
            raise ValidationError(f"{source}: {e}")
        return params.validate(self.settings.LAMBDA_MAX)


# Global instance for use across the application
mrw_service = MrwService()
