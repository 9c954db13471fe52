"""
simulate: seeded MRW path laid out on a synthetic trading calendar
"""

import logging

from src.models.mrw import MrwParams
from src.models.quotes import SampledSeries
from src.routes.common import add_common_arguments, require_seed
from src.services.ingest_service import IngestService
from src.services.mrw_service import MrwService

logger = logging.getLogger(__name__)

DEFAULT_LENGTH = 65536


def register(subparsers):
    parser = subparsers.add_parser('simulate', help='Simulate a multifractal random walk')
    add_common_arguments(parser)
    parser.add_argument('--lambda', dest='lam', type=float, help='intermittency')
    parser.add_argument('--sigma', type=float, help='volatility per sqrt(grid step)')
    parser.add_argument('--T', type=float, help='correlation length in seconds (default: whole path)')
    parser.add_argument('--dt', type=float, help='grid step in seconds (default: sampling step)')
    parser.add_argument('--n', type=int, help='number of returns')
    parser.add_argument('--samples-per-day', type=int, help='returns per synthetic trading day')
    parser.set_defaults(handler=run_simulate)
    return parser


def run_simulate(run_config, writer, settings):
    seed = require_seed(run_config)
    n = run_config.n or DEFAULT_LENGTH
    dt = run_config.dt or run_config.step
    params = MrwParams(
        lam=run_config.lam if run_config.lam is not None else 0.5,
        sigma=run_config.sigma or 1.0,
        T=run_config.T or n * dt,
        dt=dt
    )
    service = MrwService(settings)
    path = service.simulate_mrw(params, n, seed, stream=0, keep_log_volatility=run_config.keep_log_volatility)

    series = SampledSeries.synthetic(
        path.returns, dt, run_config.samples_per_day,
        start_date=settings.SYNTHETIC_START_DATE, session_open=run_config.session_open
    )
    writer.csv('path.csv', service.path_frame(path))
    writer.csv('returns.csv', IngestService.series_frame(series))
    writer.key_values('params.txt', params.to_dict())
    logger.info(f"Simulated {n} returns over {series.n_days} synthetic days (lambda={params.lam})")
    return {'seed': seed, 'stream': 0}
