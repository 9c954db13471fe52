"""
ingest: quotes CSV -> sampled log prices, log returns and constant-price statistics
"""

import logging
from datetime import timedelta

import numpy as np
import pandas as pd

from src.errors import EmptyDayError
from src.models.quotes import SegmentStats
from src.routes.common import add_common_arguments, add_session_arguments
from src.services.ingest_service import IngestService

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('ingest', help='Parse quotes and sample a regular price grid')
    add_common_arguments(parser)
    add_session_arguments(parser)
    parser.add_argument('--quotes', help='timestamp,bid,ask CSV')
    parser.add_argument('--max-start-delay', type=float, help='minutes after the open before a day is dropped')
    parser.set_defaults(handler=run_ingest)
    return parser


def run_ingest(run_config, writer, settings):
    service = IngestService(settings)
    days = service.load_quotes(run_config.quotes, run_config.session_open, run_config.session_close)
    days = service.filter_late_days(days, timedelta(minutes=run_config.max_start_delay))
    if not days:
        raise EmptyDayError("no trading day survived the start-delay filter")

    per_second = [service.mid_quote_series(day) for day in days]
    lengths = np.concatenate([service.constant_price_segments(s).segment_lengths for s in per_second])
    taus = np.unique(np.round(np.logspace(0, np.log10(max(lengths.max(), 1)), 60)))
    segments = SegmentStats(segment_lengths=lengths, total_segments=len(lengths))

    prices = service.sample_regular(per_second, int(run_config.step))
    returns = service.log_returns(prices)

    writer.csv('prices.csv', service.series_frame(prices))
    writer.csv('returns.csv', service.series_frame(returns))
    writer.csv('survival.csv', pd.DataFrame({'tau': taus, 'count': segments.survival(taus)}))
    writer.csv('inter_event.csv', pd.DataFrame({
        'date': [day.date.isoformat() for day in days],
        'ticks': [len(day.ticks) for day in days],
        'mean_seconds': [service.inter_event_time(day) for day in days]
    }))
    logger.info(f"Ingested {len(days)} days into {len(returns)} returns")
    return {}
