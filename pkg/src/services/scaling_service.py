"""
Scaling Service
Nonparametric diagnostics: autocorrelation, power spectrum, wavelet and
difference structure functions and scaling-function estimation
"""

import logging
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import signal, stats

from src.config import get_config
from src.errors import ComputationError, ScaleRangeError, ValidationError, ZeroVarianceError
from src.models.quotes import SampledSeries
from src.models.scaling import (
    DIFFERENCE, WAVELET, AcfResult, LambdaFit, ScalingReport, Spectrum, StructureFunctions
)

logger = logging.getLogger(__name__)

SeriesLike = Union[SampledSeries, np.ndarray, Sequence[float]]


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, SampledSeries):
        return series.values
    return np.asarray(series, dtype=float)


def dog1(u):
    """First derivative of the Gaussian exp(-u^2/2)"""
    return -u * np.exp(-0.5 * u ** 2)


class ScalingService:
    """Service for structure-function based multifractal diagnostics"""

    def __init__(self, settings=None):
        self.settings = settings or get_config()

    # Correlation and spectrum

    @staticmethod
    def acf(series: SeriesLike, max_lag: int, transform: str = 'identity') -> AcfResult:
        """Biased (1/n) sample autocorrelation with the +-1.96/sqrt(n) band"""
        values = _values(series)
        if transform == 'absolute-value':
            values = np.abs(values)
        elif transform != 'identity':
            raise ValidationError(f"Unknown ACF transform '{transform}'")
        n = len(values)
        if max_lag < 0 or max_lag >= n / 2:
            raise ValidationError(f"max_lag must be below n/2 = {n / 2}")

        centred = values - values.mean()
        variance = np.dot(centred, centred) / n
        if variance <= 0:
            raise ZeroVarianceError("ACF of a constant series is undefined")
        size = 1 << int(np.ceil(np.log2(2 * n)))
        spectrum = np.fft.rfft(centred, size)
        covariance = np.fft.irfft(spectrum * np.conj(spectrum), size)[:max_lag + 1] / n
        values_out = covariance / variance
        values_out[0] = 1.0
        return AcfResult(
            lags=np.arange(max_lag + 1),
            values=np.clip(values_out, -1.0, 1.0),
            band=1.96 / np.sqrt(n),
            n=n
        )

    def psd(self, series: SeriesLike, grid_step: Optional[float] = None,
            segments: Optional[int] = None) -> Spectrum:
        """
        Averaged periodogram: half-overlapping Hann-tapered segments, so
        K segments of length L cover (K + 1) L / 2 samples.
        """
        values = _values(series)
        if len(values) < 256:
            raise ValidationError("power spectrum needs at least 256 samples")
        if grid_step is None:
            grid_step = series.grid_step if isinstance(series, SampledSeries) else 1.0
        segments = segments or self.settings.PSD_SEGMENTS
        segment_length = int(2 * len(values) / (segments + 1))
        frequency, power = signal.welch(
            values,
            fs=1.0 / grid_step,
            window='hann',
            nperseg=segment_length,
            noverlap=segment_length // 2,
            detrend='constant',
            scaling='density'
        )
        return Spectrum(frequency=frequency[1:], power=power[1:], segments=segments)

    @staticmethod
    def spectral_slope(spectrum: Spectrum, f_min: float, f_max: float) -> float:
        """Least-squares log-log slope of the spectrum within [f_min, f_max]"""
        band = (spectrum.frequency >= f_min) & (spectrum.frequency <= f_max) & (spectrum.power > 0)
        if band.sum() < 3:
            raise ValidationError("fewer than 3 spectral bins in the requested band")
        fit = stats.linregress(np.log(spectrum.frequency[band]), np.log(spectrum.power[band]))
        return float(fit.slope)

    @staticmethod
    def peak_ratio(spectrum: Spectrum, frequency: float, half_width: int = 5) -> float:
        """
        Power at the bin nearest `frequency` over the median of its neighbours.
        Neighbours are compared after removing the local log-log trend.
        """
        index = int(np.argmin(np.abs(spectrum.frequency - frequency)))
        low, high = max(index - half_width, 0), min(index + half_width + 1, len(spectrum.frequency))
        neighbours = [i for i in range(low, high) if i != index]
        logf = np.log(spectrum.frequency[neighbours])
        logp = np.log(spectrum.power[neighbours])
        fit = stats.linregress(logf, logp)
        residuals = logp - (fit.intercept + fit.slope * logf)
        background = fit.intercept + fit.slope * np.log(spectrum.frequency[index]) + np.median(residuals)
        return float(spectrum.power[index] / np.exp(background))

    # Scale grids

    def default_scales(self, n: int, method: str = WAVELET, low: Optional[float] = None,
                       high: Optional[float] = None, per_decade: Optional[int] = None) -> np.ndarray:
        """
        Logarithmic scale grid in grid steps. The wavelet grid stops at n/20 so
        that the truncated kernel leaves at least half of the coefficients valid;
        the difference grid stops at n/10.
        """
        per_decade = per_decade or self.settings.SCALES_PER_DECADE
        low = low or self.settings.SCALE_MIN_STEPS
        if high is None:
            high = n / 20.0 if method == WAVELET else n / 10.0
        if high <= low:
            raise ScaleRangeError(f"empty scale range [{low}, {high}] for n={n}")
        count = int(np.floor(np.log10(high / low) * per_decade)) + 1
        scales = low * 10.0 ** (np.arange(count) / per_decade)
        if method == DIFFERENCE:
            scales = np.unique(np.round(scales).astype(int)).astype(float)
        return scales

    # Wavelet transform

    def cwt_dog1(self, series: SeriesLike, scales: Sequence[float]) -> list:
        """
        W(t, tau) = tau^{-1/2} sum_{t'} X(t') psi((t - t')/tau) on the integer grid.

        The kernel is truncated at +-5 tau; only coefficients whose kernel
        support lies inside the series are returned (one array per scale).
        """
        values = _values(series)
        n = len(values)
        truncation = self.settings.WAVELET_TRUNCATION
        coefficients = []
        for scale in scales:
            if scale < 2 or scale > n / 8:
                raise ScaleRangeError(f"scale {scale} outside [2, n/8 = {n / 8}]")
            half_width = int(np.ceil(truncation * scale))
            offsets = np.arange(-half_width, half_width + 1)
            kernel = dog1(offsets / scale) / np.sqrt(scale)
            if 2 * half_width + 1 > n:
                coefficients.append(np.zeros(0))
                continue
            coefficients.append(signal.fftconvolve(values, kernel, mode='valid'))
        return coefficients

    def wavelet_structure_functions(self, series: SeriesLike, q_grid=None, scales=None) -> StructureFunctions:
        """M(q, tau) = time average of |W(t, tau)|^q over valid t"""
        values = _values(series)
        q_grid = np.asarray(q_grid if q_grid is not None else self.settings.Q_GRID, dtype=float)
        if np.any(q_grid < 0):
            raise ValidationError("q values must be non-negative")
        scales = np.asarray(scales if scales is not None else self.default_scales(len(values), WAVELET), dtype=float)

        moments = np.empty((len(q_grid), len(scales)))
        for j, coefficients in enumerate(self.cwt_dog1(values, scales)):
            if len(coefficients) == 0:
                raise ComputationError(f"no valid wavelet coefficients at scale {scales[j]}")
            magnitude = np.abs(coefficients)
            for i, q in enumerate(q_grid):
                moments[i, j] = np.mean(magnitude ** q)
        return StructureFunctions(WAVELET, q_grid, scales, moments, (scales[0], scales[-1]))

    def difference_structure_functions(self, series: SeriesLike, q_grid=None, scales=None) -> StructureFunctions:
        """M(q, tau) = average over s of |X(s + tau) - X(s)|^q, tau in whole grid steps"""
        values = _values(series)
        q_grid = np.asarray(q_grid if q_grid is not None else self.settings.Q_GRID, dtype=float)
        if np.any(q_grid < 0):
            raise ValidationError("q values must be non-negative")
        if scales is None:
            scales = self.default_scales(len(values), DIFFERENCE)
        scales = np.unique(np.round(np.asarray(scales, dtype=float)).astype(int))

        moments = np.empty((len(q_grid), len(scales)))
        for j, lag in enumerate(scales):
            if lag < 1 or lag >= len(values):
                raise ScaleRangeError(f"difference scale {lag} outside [1, n)")
            magnitude = np.abs(values[lag:] - values[:-lag])
            for i, q in enumerate(q_grid):
                moments[i, j] = np.mean(magnitude ** q)
        scales = scales.astype(float)
        return StructureFunctions(DIFFERENCE, q_grid, scales, moments, (scales[0], scales[-1]))

    # Scaling function

    @staticmethod
    def fit_scaling_function(sf: StructureFunctions) -> ScalingReport:
        """
        Per-q ordinary least squares of log M against log tau over the fit
        range; the wavelet slope is zeta(q) + q/2.
        """
        low, high = sf.fit_range
        in_range = (sf.scales >= low) & (sf.scales <= high)
        if in_range.sum() < 5:
            raise ValidationError(f"fit range [{low}, {high}] holds fewer than 5 scales")
        fitted = sf.moments[:, in_range]
        if np.any(~np.isfinite(fitted)) or np.any(fitted <= 0):
            raise ComputationError("structure functions must be positive and finite to fit")

        log_scales = np.log(sf.scales[in_range])
        zeta, stderr, r2 = [], [], []
        for q, row in zip(sf.q_grid, np.log(fitted)):
            if np.ptp(row) == 0:
                slope, error, determination = 0.0, 0.0, 1.0
            else:
                fit = stats.linregress(log_scales, row)
                slope, error, determination = fit.slope, fit.stderr, fit.rvalue ** 2
            if sf.method == WAVELET:
                slope -= q / 2.0
            zeta.append(slope)
            stderr.append(error)
            r2.append(determination)
        return ScalingReport(
            q_grid=np.asarray(sf.q_grid, dtype=float),
            zeta_hat=np.array(zeta),
            stderr=np.array(stderr),
            r2=np.array(r2),
            method=sf.method
        )

    @staticmethod
    def fit_lambda_to_zeta(report: ScalingReport) -> LambdaFit:
        """
        Weighted least squares of zeta(q) = q/2 + lambda^2 q(2 - q)/8, linear in
        lambda^2, with weights 1/stderr^2 (uniform when any stderr vanishes).
        A negative optimum is reported as lambda = 0 with the degeneracy flag.
        """
        if len(report.q_grid) < 4:
            raise ValidationError("fitting lambda needs at least 4 q values")
        q = report.q_grid
        basis = q * (2.0 - q) / 8.0
        target = report.zeta_hat - q / 2.0
        if np.any(report.stderr <= 0) or np.any(~np.isfinite(report.stderr)):
            weights = np.ones_like(q)
        else:
            weights = 1.0 / report.stderr ** 2
        denominator = np.sum(weights * basis ** 2)
        if denominator == 0:
            raise ComputationError("q grid carries no information about lambda")
        lambda_squared = float(np.sum(weights * basis * target) / denominator)
        residual = float(np.sum(weights * (target - lambda_squared * basis) ** 2))
        if lambda_squared < 0:
            return LambdaFit(lam=0.0, degenerate=True, lambda_squared=lambda_squared, residual=residual)
        return LambdaFit(lam=float(np.sqrt(lambda_squared)), degenerate=False,
                         lambda_squared=lambda_squared, residual=residual)

    # Tabular forms

    @staticmethod
    def acf_frame(result: AcfResult) -> pd.DataFrame:
        return pd.DataFrame({'lag': result.lags, 'acf': result.values, 'band': result.band})

    @staticmethod
    def spectrum_frame(spectrum: Spectrum) -> pd.DataFrame:
        return pd.DataFrame({'frequency': spectrum.frequency, 'power': spectrum.power})

    @staticmethod
    def structure_frame(sf: StructureFunctions) -> pd.DataFrame:
        q, tau = np.meshgrid(sf.q_grid, sf.scales, indexing='ij')
        return pd.DataFrame({'q': q.ravel(), 'tau': tau.ravel(), 'moment': sf.moments.ravel()})

    @staticmethod
    def report_frame(report: ScalingReport) -> pd.DataFrame:
        return pd.DataFrame({
            'q': report.q_grid,
            'zeta': report.zeta_hat,
            'stderr': report.stderr,
            'r2': report.r2
        })


# Global instance for use across the application
scaling_service = ScalingService()
