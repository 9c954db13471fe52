"""
deseason: remove the intraday volatility smile and the mean periodicity
"""

import logging

from src.models.quotes import LOG_RETURN
from src.routes.common import add_common_arguments
from src.services.ingest_service import IngestService
from src.services.scaling_service import ScalingService
from src.services.season_service import MEAN_PASS_MODES, SeasonService

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('deseason', help='Normalise returns by the one-day volatility profile')
    add_common_arguments(parser)
    parser.add_argument('--returns', help='sampled log-return CSV from ingest')
    parser.add_argument('--session-open', help='HH:MM[:SS]')
    parser.add_argument('--mean-pass', choices=MEAN_PASS_MODES)
    parser.add_argument('--smoothing', type=int, help='moving-average width of the profile in buckets')
    parser.add_argument('--acf-max-lag', type=int)
    parser.set_defaults(handler=run_deseason)
    return parser


def run_deseason(run_config, writer, settings):
    ingest = IngestService(settings)
    season = SeasonService(settings)
    scaling = ScalingService(settings)

    returns = ingest.read_sampled_series(run_config.returns, LOG_RETURN, session_open=run_config.session_open)
    deseasonalized, profile, mean_profile = season.run_pipeline(
        returns, mean_pass=run_config.mean_pass, smoothing=run_config.smoothing
    )
    refitted = season.fit_profile(deseasonalized, smoothing=0)

    writer.csv('deseasonalized.csv', ingest.series_frame(deseasonalized))
    writer.csv('profile.csv', season.profile_frame(profile, returns.grid_step, returns.session_open))
    writer.csv('mean_profile.csv', season.profile_frame(mean_profile, returns.grid_step, returns.session_open))

    max_lag = min(run_config.acf_max_lag, (len(deseasonalized) - 1) // 2)
    for name, series, transform in (
        ('acf_raw.csv', returns, 'identity'),
        ('acf.csv', deseasonalized, 'identity'),
        ('acf_absolute.csv', deseasonalized, 'absolute-value')
    ):
        writer.csv(name, scaling.acf_frame(scaling.acf(series, max_lag, transform)))

    inside = scaling.acf(deseasonalized, max_lag).fraction_inside_band()
    writer.key_values('deseason_summary.txt', {
        'days': returns.n_days,
        'returns': len(returns),
        'bucket_count': returns.bucket_count,
        'profile_max_over_min': profile.flatness,
        'refitted_max_over_min': refitted.flatness,
        'acf_fraction_inside_band': inside
    })
    return {}
