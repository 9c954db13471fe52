"""
MLE Service
Approximate maximum likelihood for the MRW parameters (lambda, sigma, T)

The likelihood integrates the latent log-volatility field out with a Laplace
approximation around its posterior mode. The mode search follows the
numerically stable Newton recursion for latent Gaussian models, working with
B = I + W^1/2 K W^1/2 instead of K^-1, so lambda = 0 (K = 0) needs no special
casing in the inner loop.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky, toeplitz
from scipy.optimize import minimize
from scipy.special import logsumexp

from src.config import get_config
from src.errors import (
    ComputationError, CovarianceFactorizationError, DegenerateWindowError, EmptyWindowError,
    FitConvergenceError, NewtonConvergenceError, ValidationError
)
from src.models.estimates import (
    CALENDAR_MONTH, CALENDAR_YEAR, FIXED_COUNT, WINDOW_RULES, EstimateSeries, FitResult
)
from src.models.mrw import MrwParams
from src.models.quotes import SampledSeries
from src.services.artifact_service import write_csv
from src.services.mrw_service import mrw_service

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)

#: Returned by the optimizer objective when the likelihood cannot be evaluated
_out_of_bounds_val = 1e10

T_POLICIES = ('window', 'fit', 'fixed')


@dataclass
class PosteriorMode:
    """
    Mode of the latent log-volatility given the returns.

    The negative Hessian K^-1 + W is kept in the factorised form
    B = I + W^1/2 K W^1/2 = L L^T, with log det(K^-1 + W) = log det B - log det K.
    """
    mode: np.ndarray
    alpha: np.ndarray
    weights: np.ndarray
    cholesky: np.ndarray
    iterations: int
    gradient_norm: float

    @property
    def log_det_b(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.cholesky))))


@dataclass
class FitOptions:
    """Optimizer settings for one fit"""
    t_policy: str = 'window'
    T: Optional[float] = None
    dt: Optional[float] = None
    restarts: Optional[int] = None
    lambda_max: Optional[float] = None


def _data_terms(squares, h, variance):
    """Per-point log N(x_t; 0, variance * e^{h_t})"""
    return -0.5 * (LOG_2PI + np.log(variance)) - 0.5 * h - squares * np.exp(-h) / (2.0 * variance)


class MleService:
    """Service for Laplace-approximate likelihood and MRW parameter estimation"""

    def __init__(self, settings=None):
        self.settings = settings or get_config()

    # Densities

    @staticmethod
    def covariance_matrix(params: MrwParams, n: int) -> np.ndarray:
        return toeplitz(mrw_service.log_vol_covariance(params, np.arange(n)))

    @staticmethod
    def _check_inputs(x, h=None):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or len(x) == 0:
            raise ValidationError("returns must be a non-empty vector")
        if not np.all(np.isfinite(x)):
            raise ValidationError("returns must be finite")
        if h is None:
            return x, None
        h = np.asarray(h, dtype=float)
        if h.shape != x.shape:
            raise ValidationError("returns and latent vector must have the same length")
        if not np.all(np.isfinite(h)):
            raise ValidationError("latent vector must be finite")
        return x, h

    def joint_log_density(self, x, h, params: MrwParams) -> float:
        """log p(x | h) + log p(h) for the MRW with Gaussian log-volatility prior"""
        x, h = self._check_inputs(x, h)
        variance = params.sigma ** 2 * mrw_service.normalization_constant(params)
        data = float(np.sum(_data_terms(x ** 2, h, variance)))

        covariance = self.covariance_matrix(params, len(x))
        if covariance[0, 0] == 0.0:
            # degenerate prior: all mass at h = 0
            return data if np.all(h == 0.0) else -np.inf
        factor = self._factor(covariance)
        alpha = cho_solve(factor, h)
        log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
        prior = -0.5 * float(h @ alpha) - 0.5 * log_det - 0.5 * len(x) * LOG_2PI
        return data + prior

    def joint_log_density_gradient(self, x, h, params: MrwParams) -> np.ndarray:
        """Gradient of joint_log_density with respect to h"""
        x, h = self._check_inputs(x, h)
        variance = params.sigma ** 2 * mrw_service.normalization_constant(params)
        gradient = -0.5 + x ** 2 * np.exp(-h) / (2.0 * variance)
        covariance = self.covariance_matrix(params, len(x))
        if covariance[0, 0] == 0.0:
            return gradient
        return gradient - cho_solve(self._factor(covariance), h)

    @staticmethod
    def _factor(covariance):
        try:
            return cho_factor(covariance, lower=True)
        except LinAlgError as e:
            raise CovarianceFactorizationError(f"log-volatility covariance not positive definite: {e}")

    # Laplace approximation

    def posterior_mode(self, x, params: MrwParams, initial: Optional[np.ndarray] = None) -> PosteriorMode:
        """
        Newton search for argmax_h joint_log_density, safeguarded by step halving.

        Without a warm start, h begins at log(x_t^2 / (sigma^2 c)) clipped to [-8, 8].
        """
        x, _ = self._check_inputs(x)
        n = len(x)
        squares = x ** 2
        variance = params.sigma ** 2 * mrw_service.normalization_constant(params)
        covariance = self.covariance_matrix(params, n)
        identity = np.eye(n)

        if covariance[0, 0] == 0.0:
            weights = squares / (2.0 * variance)
            return PosteriorMode(np.zeros(n), np.zeros(n), weights, identity, 0, 0.0)

        if initial is None:
            with np.errstate(divide='ignore'):
                initial = np.clip(np.log(squares / variance), -8.0, 8.0)
        alpha = cho_solve(self._factor(covariance), initial)
        h = covariance @ alpha

        def objective(alpha_, h_):
            return float(np.sum(_data_terms(squares, h_, variance)) - 0.5 * alpha_ @ h_)

        value = objective(alpha, h)
        tolerance = self.settings.NEWTON_TOLERANCE
        gradient_norm = np.inf
        for iteration in range(self.settings.NEWTON_MAX_ITERATIONS + 1):
            weights = squares * np.exp(-h) / (2.0 * variance)
            likelihood_gradient = -0.5 + weights
            gradient_norm = float(np.max(np.abs(likelihood_gradient - alpha)))
            if gradient_norm < tolerance:
                break
            if iteration == self.settings.NEWTON_MAX_ITERATIONS:
                raise NewtonConvergenceError(gradient_norm, iteration)

            root = np.sqrt(weights)
            system = identity + root[:, None] * covariance * root[None, :]
            lower = cholesky(system, lower=True)
            b = weights * h + likelihood_gradient
            correction = cho_solve((lower, True), root * (covariance @ b))
            direction = b - root * correction - alpha

            step = 1.0
            slack = 1e-12 * max(1.0, abs(value))
            for _ in range(self.settings.NEWTON_MAX_HALVINGS + 1):
                candidate_alpha = alpha + step * direction
                candidate_h = covariance @ candidate_alpha
                candidate_value = objective(candidate_alpha, candidate_h)
                if candidate_value >= value - slack:
                    break
                step /= 2.0
            else:
                raise NewtonConvergenceError(gradient_norm, iteration)
            alpha, h, value = candidate_alpha, candidate_h, candidate_value

        weights = squares * np.exp(-h) / (2.0 * variance)
        root = np.sqrt(weights)
        lower = cholesky(identity + root[:, None] * covariance * root[None, :], lower=True)
        return PosteriorMode(h, alpha, weights, lower, iteration, gradient_norm)

    def approx_log_likelihood(self, x, params: MrwParams, initial: Optional[np.ndarray] = None,
                              return_mode: bool = False):
        """
        Laplace approximation of log p(x | params):
        joint_log_density(x, h_hat) + n/2 log(2 pi) - 1/2 log det(K^-1 + W),
        evaluated as sum log p(x_t | h_hat_t) - 1/2 h_hat' K^-1 h_hat - 1/2 log det B.
        """
        x, _ = self._check_inputs(x)
        variance = params.sigma ** 2 * mrw_service.normalization_constant(params)
        mode = self.posterior_mode(x, params, initial)
        value = (float(np.sum(_data_terms(x ** 2, mode.mode, variance)))
                 - 0.5 * float(mode.alpha @ mode.mode)
                 - 0.5 * mode.log_det_b)
        return (value, mode) if return_mode else value

    def quadrature_likelihood_oracle(self, x, params: MrwParams, nodes: int = 40) -> float:
        """Tensor-product Gauss-Hermite log-likelihood; test oracle for n <= 4"""
        x, _ = self._check_inputs(x)
        n = len(x)
        if n > 4:
            raise ValidationError(f"quadrature oracle refuses n={n} > 4")
        if nodes < 40:
            raise ValidationError("quadrature oracle needs at least 40 nodes per dimension")
        variance = params.sigma ** 2 * mrw_service.normalization_constant(params)
        covariance = self.covariance_matrix(params, n)
        if covariance[0, 0] == 0.0:
            return float(np.sum(_data_terms(x ** 2, np.zeros(n), variance)))

        eigenvalues, eigenvectors = np.linalg.eigh(covariance)
        root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
        points, weights = hermegauss(nodes)
        grid = np.stack(np.meshgrid(*([points] * n), indexing='ij')).reshape(n, -1)
        log_weights = np.sum(np.log(np.stack(np.meshgrid(*([weights] * n), indexing='ij')).reshape(n, -1)), axis=0)
        latent = root @ grid
        log_density = np.sum(_data_terms((x ** 2)[:, None], latent, variance), axis=0)
        # hermegauss weights integrate against exp(-z^2/2), total mass sqrt(2 pi)
        return float(logsumexp(log_weights + log_density) - 0.5 * n * LOG_2PI)

    # Estimation

    def fit_mrw(self, x, options: Optional[FitOptions] = None,
                window: Tuple[Optional[datetime], Optional[datetime]] = (None, None)) -> FitResult:
        """
        Maximise the Laplace likelihood over (lambda, ln sigma) and optionally ln T.

        Returns are standardised by their sample deviation before fitting, so
        scaling the data by k scales sigma by k and leaves lambda unchanged.
        """
        options = options or FitOptions()
        settings = self.settings
        values = x.values if isinstance(x, SampledSeries) else np.asarray(x, dtype=float)
        dt = options.dt or (x.grid_step if isinstance(x, SampledSeries) else 1.0)
        lambda_max = options.lambda_max or settings.LAMBDA_MAX
        restarts = options.restarts or settings.OPTIMIZER_RESTARTS
        if options.t_policy not in T_POLICIES:
            raise ValidationError(f"Unknown T policy '{options.t_policy}'")

        n = len(values)
        if n == 0:
            raise EmptyWindowError("cannot fit an empty window")
        if n < settings.MIN_WINDOW_OBSERVATIONS:
            logger.warning(f"Fitting only {n} observations (soft floor {settings.MIN_WINDOW_OBSERVATIONS})")
        if n > settings.MAX_WINDOW_OBSERVATIONS:
            logger.warning(f"Window of {n} observations exceeds the dense-algebra cap "
                           f"{settings.MAX_WINDOW_OBSERVATIONS}; expect long run times")
        zero_fraction = float(np.mean(values == 0.0))
        if zero_fraction > settings.MAX_ZERO_FRACTION:
            raise DegenerateWindowError(f"{zero_fraction:.0%} of the returns are zero")
        scale = float(np.std(values))
        if not np.isfinite(scale) or scale == 0.0:
            raise DegenerateWindowError("returns have zero variance")
        standardized = values / scale

        if options.t_policy == 'fixed':
            if options.T is None:
                raise ValidationError("T policy 'fixed' requires T")
            fixed_T = options.T
        else:
            fixed_T = n * dt

        half_width = settings.LOG_SIGMA_HALF_WIDTH
        bounds = [(0.0, lambda_max), (-half_width, half_width)]
        start = [min(settings.LAMBDA_START, lambda_max), 0.0]
        if options.t_policy == 'fit':
            bounds.append((np.log(2.0 * dt), np.log(10.0 * n * dt)))
            start.append(np.log(fixed_T))

        def unpack(theta):
            T = float(np.exp(theta[2])) if options.t_policy == 'fit' else fixed_T
            return MrwParams(lam=float(theta[0]), sigma=float(np.exp(theta[1])), T=T, dt=dt)

        warm = {'mode': None}

        def objective(theta):
            try:
                value, mode = self.approx_log_likelihood(
                    standardized, unpack(theta), initial=warm['mode'], return_mode=True
                )
            except ComputationError as e:
                logger.debug(f"Likelihood failed at {theta}: {e}")
                return _out_of_bounds_val
            if not np.isfinite(value):
                return _out_of_bounds_val
            warm['mode'] = mode.mode
            return -value

        trace: List[float] = []

        def track(intermediate_result):
            trace.append(-float(intermediate_result.fun))

        best, last, iterations = None, None, 0
        for restart in range(restarts):
            last = minimize(
                objective, np.asarray(start, dtype=float), method='Nelder-Mead', bounds=bounds,
                callback=track,
                options={
                    'xatol': settings.OPTIMIZER_XATOL,
                    'fatol': settings.OPTIMIZER_FATOL,
                    'maxiter': settings.OPTIMIZER_MAX_ITERATIONS
                }
            )
            iterations += int(last.nit)
            if best is None or last.fun < best.fun:
                best = last
            start = best.x
            logger.debug(f"Restart {restart + 1}/{restarts}: -loglik={last.fun:.6f} at {last.x}")

        if best is None or best.fun >= _out_of_bounds_val:
            raise FitConvergenceError(
                "likelihood could not be evaluated at any simplex point",
                best_point=None if best is None else best.x, best_value=None
            )

        params = unpack(best.x)
        params = MrwParams(lam=params.lam, sigma=params.sigma * scale, T=params.T, dt=dt)
        log_likelihood = -float(best.fun) - n * np.log(scale)
        converged = bool(last.success) and np.isfinite(log_likelihood)
        return FitResult(
            params=params,
            log_likelihood=log_likelihood,
            n=n,
            converged=converged,
            iterations=iterations,
            window=window,
            trace=trace,
            message='' if converged else str(last.message)
        )

    # Windows

    @staticmethod
    def split_windows(series: SampledSeries, rule: str, count: Optional[int] = None):
        """List of (start, stop) index pairs into the series values"""
        if rule not in WINDOW_RULES:
            raise ValidationError(f"Unknown window rule '{rule}'")
        if rule == FIXED_COUNT:
            if not count or count < 1:
                raise ValidationError("fixed-count windows need a positive count")
            if count > len(series):
                raise EmptyWindowError(f"{count} windows requested for {len(series)} observations")
            edges = np.linspace(0, len(series), count + 1).round().astype(int)
            return list(zip(edges[:-1].tolist(), edges[1:].tolist()))

        keys = [(d.year, d.month) if rule == CALENDAR_MONTH else (d.year,) for d in series.dates]
        slices = series.day_slices()
        windows, current_key, current_start = [], None, None
        for key, day_slice in zip(keys, slices):
            if key != current_key:
                if current_key is not None:
                    windows.append((current_start, day_slice.start))
                current_key, current_start = key, day_slice.start
        windows.append((current_start, len(series)))
        return windows

    def fit_windows(self, series: SampledSeries, rule: str, count: Optional[int] = None,
                    options: Optional[FitOptions] = None, jobs: int = 1) -> EstimateSeries:
        """Independent fit per window; failed windows stay in the output as non-converged"""
        options = options or FitOptions(dt=series.grid_step)
        if options.dt is None:
            options = FitOptions(options.t_policy, options.T, series.grid_step, options.restarts, options.lambda_max)
        stamps = series.timestamps()
        windows = self.split_windows(series, rule, count)
        tasks = []
        for number, (start, stop) in enumerate(windows):
            if stop <= start:
                raise EmptyWindowError(f"window {number} is empty")
            tasks.append((self.settings, series.values[start:stop], options, (stamps[start], stamps[stop - 1])))

        if jobs and jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                results = list(executor.map(_fit_window_task, tasks))
        else:
            results = [_fit_window_task(task) for task in tasks]

        failed = sum(1 for r in results if not r.converged)
        logger.info(f"Fitted {len(results)} {rule} windows ({failed} not converged)")
        return EstimateSeries(results=results, window_rule=rule)

    # Estimates CSV

    @staticmethod
    def estimates_frame(estimates: EstimateSeries) -> pd.DataFrame:
        return pd.DataFrame(
            [r.to_dict() for r in estimates.results],
            columns=['window_start', 'window_end', 'n', 'lambda', 'sigma', 'T_seconds', 'loglik', 'converged']
        )

    def write_estimates(self, estimates: EstimateSeries, path) -> Path:
        return write_csv(self.estimates_frame(estimates), path)

    @staticmethod
    def read_estimates(path, dt: float = 1.0, window_rule: str = FIXED_COUNT) -> EstimateSeries:
        """Rebuild an EstimateSeries from an estimates CSV"""
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise ValidationError(f"{path}: file not found")
        required = {'window_start', 'window_end', 'n', 'lambda', 'sigma', 'T_seconds', 'loglik', 'converged'}
        missing = required - set(frame.columns)
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        starts = pd.to_datetime(frame['window_start'], format='ISO8601', errors='coerce')
        ends = pd.to_datetime(frame['window_end'], format='ISO8601', errors='coerce')
        results = []
        for i, row in frame.iterrows():
            start = None if pd.isna(starts[i]) else starts[i].to_pydatetime()
            end = None if pd.isna(ends[i]) else ends[i].to_pydatetime()
            results.append(FitResult(
                params=MrwParams(lam=float(row['lambda']), sigma=float(row['sigma']),
                                 T=float(row['T_seconds']), dt=dt),
                log_likelihood=float(row['loglik']),
                n=int(row['n']),
                converged=str(row['converged']).strip().lower() == 'true',
                iterations=0,
                window=(start, end)
            ))
        return EstimateSeries(results=results, window_rule=window_rule)


def _fit_window_task(task) -> FitResult:
    settings, values, options, window = task
    service = MleService(settings)
    try:
        return service.fit_mrw(values, options, window=window)
    except ComputationError as e:
        logger.warning(f"Window {window[0]} - {window[1]} failed: {e}")
        best = getattr(e, 'best_point', None)
        lam = float(best[0]) if best is not None else float('nan')
        return FitResult(
            params=MrwParams(lam=lam, sigma=float('nan'), T=float('nan'), dt=options.dt or 1.0),
            log_likelihood=float('nan'),
            n=len(values),
            converged=False,
            iterations=0,
            window=window,
            message=str(e)
        )


# Global instance for use across the application
mle_service = MleService()
