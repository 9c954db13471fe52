"""
fit: approximate maximum-likelihood estimates per calendar or fixed-count window
"""

import logging

import numpy as np

from src.models.quotes import LOG_RETURN
from src.routes.common import add_common_arguments
from src.services.ingest_service import IngestService
from src.services.mle_service import T_POLICIES, FitOptions, MleService

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('fit', help='Estimate (lambda, sigma, T) per window')
    add_common_arguments(parser)
    parser.add_argument('--returns', help='sampled log-return CSV')
    parser.add_argument('--windows', dest='window_rule', help='month | year | count')
    parser.add_argument('--window-count', type=int, help='number of equal windows for --windows count')
    parser.add_argument('--t-policy', choices=T_POLICIES, help='T fixed to the window, fitted, or fixed to --T')
    parser.add_argument('--T', type=float, help='correlation length in seconds for --t-policy fixed')
    parser.set_defaults(handler=run_fit)
    return parser


def run_fit(run_config, writer, settings):
    ingest = IngestService(settings)
    mle = MleService(settings)

    returns = ingest.read_sampled_series(run_config.returns, LOG_RETURN, session_open=run_config.session_open)
    options = FitOptions(t_policy=run_config.t_policy, T=run_config.T, dt=returns.grid_step)
    estimates = mle.fit_windows(returns, run_config.window_rule, run_config.window_count, options,
                                jobs=run_config.jobs)

    writer.csv('estimates.csv', mle.estimates_frame(estimates))
    lambdas = estimates.lambdas()
    writer.key_values('fit_summary.txt', {
        'window_rule': estimates.window_rule,
        'windows': len(estimates),
        'converged': len(lambdas),
        'lambda_mean': float(np.mean(lambdas)) if len(lambdas) else float('nan'),
        'lambda_range': float(np.ptp(lambdas)) if len(lambdas) else float('nan')
    })
    return {}
