"""
Ingest Service
Loads best bid/ask quotes, builds per-second mid-quote prices and the
regularly sampled log-price / log-return series
"""

import logging
import re
from collections import OrderedDict
from datetime import datetime, time, timedelta
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.config import get_config
from src.errors import (
    EmptyDayError, QuoteParseError, QuoteValidationError, ValidationError
)
from src.models.quotes import (
    LOG_PRICE, LOG_RETURN, QuoteTick, SampledSeries, SecondSeries, SegmentStats, TradingDay
)
from src.services.artifact_service import write_csv

logger = logging.getLogger(__name__)

QUOTE_COLUMNS = ['timestamp', 'bid', 'ask']
SERIES_COLUMNS = ['timestamp', 'value', 'day_index']


class IngestService:
    """Service for turning raw quote files into sampled price series"""

    def __init__(self, settings=None):
        self.settings = settings or get_config()

    def load_quotes(self, path, session_open: Optional[time] = None,
                    session_close: Optional[time] = None) -> List[TradingDay]:
        """
        Parse a `timestamp,bid,ask` CSV into trading days.

        Args:
            path: quotes CSV file
            session_open / session_close: trading hours; configuration defaults otherwise

        Returns:
            One TradingDay per calendar date, ticks sorted by timestamp
        """
        session_open = session_open or self.settings.SESSION_OPEN
        session_close = session_close or self.settings.SESSION_CLOSE
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"Quotes file not found: {path}")

        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except pd.errors.ParserError as e:
            match = re.search(r'line (\d+)', str(e))
            raise QuoteParseError(int(match.group(1)) if match else 0, str(e))

        if list(frame.columns) != QUOTE_COLUMNS:
            raise QuoteParseError(1, f"expected header {','.join(QUOTE_COLUMNS)}, got {','.join(frame.columns)}")

        timestamps = pd.to_datetime(frame['timestamp'], format='ISO8601', errors='coerce')
        bids = pd.to_numeric(frame['bid'], errors='coerce')
        asks = pd.to_numeric(frame['ask'], errors='coerce')

        malformed = (timestamps.isna() | bids.isna() | asks.isna()).to_numpy()
        if malformed.any():
            row = int(np.flatnonzero(malformed)[0])
            raw = ','.join(frame.iloc[row].astype(str))
            # header is line 1
            raise QuoteParseError(row + 2, f"malformed row '{raw}'")

        bid_values = bids.to_numpy(dtype=float)
        ask_values = asks.to_numpy(dtype=float)
        stamps = timestamps.dt.to_pydatetime()

        invalid = (bid_values <= 0) | (ask_values <= 0) | (ask_values < bid_values)
        if invalid.any():
            row = int(np.flatnonzero(invalid)[0])
            tick = QuoteTick(stamps[row], bid_values[row], ask_values[row])
            if bid_values[row] > 0 and ask_values[row] > 0:
                reason = 'crossed book (ask < bid)'
            else:
                reason = 'non-positive price'
            raise QuoteValidationError(tick, reason, line_number=row + 2)

        order = np.argsort(timestamps.to_numpy(), kind='mergesort')
        days = OrderedDict()
        dropped = 0
        for row in order:
            stamp = stamps[row]
            day = days.get(stamp.date())
            if day is None:
                day = TradingDay(stamp.date(), session_open, session_close, [])
                days[stamp.date()] = day
            if not (day.open_datetime <= stamp <= day.close_datetime):
                dropped += 1
                continue
            day.ticks.append(QuoteTick(stamp, float(bid_values[row]), float(ask_values[row])))

        if dropped:
            logger.warning(f"Dropped {dropped} ticks outside the {session_open}-{session_close} session")
        logger.info(f"Loaded {len(frame)} quotes over {len(days)} trading days from {path}")
        return list(days.values())

    def filter_late_days(self, days: Sequence[TradingDay],
                         max_delay: Optional[timedelta] = None) -> List[TradingDay]:
        """Remove days whose first tick comes later than open + max_delay"""
        if max_delay is None:
            max_delay = timedelta(minutes=self.settings.MAX_START_DELAY_MINUTES)
        if max_delay < timedelta(0):
            raise ValidationError("max_delay must be non-negative")

        kept = [
            day for day in days
            if day.ticks and day.first_tick_time <= day.open_datetime + max_delay
        ]
        if len(kept) != len(days):
            logger.info(f"Removed {len(days) - len(kept)} late-starting days (threshold {max_delay})")
        return kept

    def mid_quote_series(self, day: TradingDay) -> SecondSeries:
        """Forward-filled mid quote for every second from the first tick to the close (inclusive)"""
        if not day.ticks:
            raise EmptyDayError(f"Trading day {day.date} has no ticks")

        index = pd.DatetimeIndex([tick.timestamp for tick in day.ticks]).floor('s')
        mids = pd.Series([tick.mid for tick in day.ticks], index=index)
        # latest tick within each second wins
        per_second = mids.groupby(level=0).last()

        start = per_second.index[0]
        grid = pd.date_range(start, day.close_datetime, freq='s')
        if len(grid) == 0:
            raise EmptyDayError(f"Trading day {day.date} has no ticks before the close")
        prices = per_second.reindex(grid, method='ffill').to_numpy(dtype=float)

        return SecondSeries(
            date=day.date,
            start=start.to_pydatetime(),
            prices=prices,
            session_open=day.session_open,
            session_close=day.session_close
        )

    @staticmethod
    def inter_event_time(day: TradingDay) -> float:
        """Mean seconds between consecutive ticks of a day"""
        if len(day.ticks) < 2:
            return float('nan')
        span = (day.ticks[-1].timestamp - day.ticks[0].timestamp).total_seconds()
        return span / (len(day.ticks) - 1)

    @staticmethod
    def constant_price_segments(series: Union[SecondSeries, np.ndarray]) -> SegmentStats:
        """Maximal runs of equal consecutive prices, lengths in seconds"""
        prices = series.prices if isinstance(series, SecondSeries) else np.asarray(series, dtype=float)
        if len(prices) == 0:
            raise ValidationError("cannot segment an empty price series")
        changes = np.flatnonzero(np.diff(prices) != 0) + 1
        edges = np.concatenate([[0], changes, [len(prices)]])
        lengths = np.diff(edges)
        return SegmentStats(segment_lengths=lengths, total_segments=len(lengths))

    def sample_regular(self, series: Union[SecondSeries, Sequence[SecondSeries]],
                       step: Optional[int] = None) -> SampledSeries:
        """
        Sample log prices every `step` seconds on the grid session_open + k*step.

        Grid points before a day's first tick carry no price and are skipped;
        a complete day yields floor(session_seconds / step) + 1 samples.
        """
        step = step or self.settings.SAMPLING_STEP_SECONDS
        days = [series] if isinstance(series, SecondSeries) else list(series)
        if not days:
            raise ValidationError("no per-second series to sample")
        if step < 1:
            raise ValidationError(f"sampling step must be at least 1 second, got {step}")

        pieces, dates, offsets = [], [], []
        bucket_count = 0
        for day in days:
            if len(day) == 0:
                raise ValidationError(f"per-second series for {day.date} is empty")
            session = day.session_seconds
            if step > session:
                raise ValidationError(f"sampling step {step}s exceeds the {session}s session")
            grid = np.arange(session // step + 1) * step
            bucket_count = max(bucket_count, len(grid))
            kept = np.flatnonzero(grid >= day.offset_seconds)
            if len(kept) == 0:
                logger.warning(f"Day {day.date} starts after the last grid point; skipped")
                continue
            positions = grid[kept] - day.offset_seconds
            pieces.append(np.log(day.prices[positions]))
            dates.append(day.date)
            offsets.append(int(kept[0]))

        if not pieces:
            raise ValidationError("no day produced any sample")
        lengths = [len(p) for p in pieces]
        return SampledSeries(
            values=np.concatenate(pieces),
            grid_step=float(step),
            day_boundaries=np.concatenate([[0], np.cumsum(lengths)[:-1]]),
            kind=LOG_PRICE,
            dates=dates,
            day_offsets=np.array(offsets),
            bucket_count=bucket_count,
            session_open=days[0].session_open
        )

    @staticmethod
    def log_returns(series: SampledSeries) -> SampledSeries:
        """First differences within each day; overnight returns are never formed"""
        if series.kind != LOG_PRICE:
            raise ValidationError(f"log_returns expects a {LOG_PRICE} series, got {series.kind}")
        if len(series) < 2:
            raise ValidationError("log_returns needs at least 2 samples")

        pieces, dates, offsets = [], [], []
        for day_number, day_slice in enumerate(series.day_slices()):
            values = series.values[day_slice]
            if len(values) < 2:
                continue
            pieces.append(np.diff(values))
            dates.append(series.dates[day_number])
            offsets.append(int(series.day_offsets[day_number]))
        if not pieces:
            raise ValidationError("no day has two or more samples")

        lengths = [len(p) for p in pieces]
        return SampledSeries(
            values=np.concatenate(pieces),
            grid_step=series.grid_step,
            day_boundaries=np.concatenate([[0], np.cumsum(lengths)[:-1]]),
            kind=LOG_RETURN,
            dates=dates,
            day_offsets=np.array(offsets),
            bucket_count=series.bucket_count - 1,
            session_open=series.session_open
        )

    @staticmethod
    def integrated_path(returns: SampledSeries) -> np.ndarray:
        """X(t) = sum_{k<=t} x_k with X(0) = 0, one continuous path across all days"""
        if returns.kind != LOG_RETURN:
            raise ValidationError(f"cumulate expects a {LOG_RETURN} series, got {returns.kind}")
        return np.concatenate([[0.0], np.cumsum(returns.values)])

    @staticmethod
    def cumulate(returns: SampledSeries) -> SampledSeries:
        """
        Re-based log-price path, day by day.

        Each day gets its own opening sample, so a day with m returns yields
        m + 1 prices. Day 0 opens at 0 and every later day opens at the
        previous day's close; no overnight jump is added.
        """
        path = IngestService.integrated_path(returns)
        pieces = []
        for day_slice in returns.day_slices():
            pieces.append(path[day_slice.start:day_slice.stop + 1])
        lengths = [len(p) for p in pieces]
        return SampledSeries(
            values=np.concatenate(pieces),
            grid_step=returns.grid_step,
            day_boundaries=np.concatenate([[0], np.cumsum(lengths)[:-1]]),
            kind=LOG_PRICE,
            dates=list(returns.dates),
            day_offsets=returns.day_offsets.copy(),
            bucket_count=returns.bucket_count + 1,
            session_open=returns.session_open
        )

    @staticmethod
    def series_frame(series: SampledSeries) -> pd.DataFrame:
        return pd.DataFrame({
            'timestamp': [stamp.isoformat() for stamp in series.timestamps()],
            'value': series.values,
            'day_index': series.day_index()
        })

    def write_sampled_series(self, series: SampledSeries, path) -> Path:
        return write_csv(self.series_frame(series), path)

    def read_sampled_series(self, path, kind=LOG_RETURN, grid_step=None,
                            session_open: Optional[time] = None) -> SampledSeries:
        """Rebuild a SampledSeries from the `timestamp,value,day_index` CSV"""
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"Series file not found: {path}")
        frame = pd.read_csv(path)
        if list(frame.columns) != SERIES_COLUMNS:
            raise ValidationError(f"{path}: expected header {','.join(SERIES_COLUMNS)}")
        if frame.empty:
            raise ValidationError(f"{path}: no rows")

        session_open = session_open or self.settings.SESSION_OPEN
        stamps = pd.to_datetime(frame['timestamp'], format='ISO8601', errors='coerce')
        values = pd.to_numeric(frame['value'], errors='coerce')
        day_numbers = pd.to_numeric(frame['day_index'], errors='coerce')
        bad = (stamps.isna() | ~np.isfinite(values) | day_numbers.isna()).to_numpy()
        if bad.any():
            line = int(np.flatnonzero(bad)[0]) + 2
            raise ValidationError(f"{path}:{line}: unparseable timestamp, value or day_index")
        day_index = day_numbers.to_numpy()
        boundaries = np.flatnonzero(np.diff(day_index, prepend=day_index[0] - 1) != 0)

        if grid_step is None:
            gaps = stamps.diff().dt.total_seconds().to_numpy()[1:]
            same_day = np.diff(day_index) == 0
            positive = gaps[same_day & (gaps > 0)] if len(gaps) else np.array([])
            grid_step = float(positive.min()) if len(positive) else float(self.settings.SAMPLING_STEP_SECONDS)

        shift = 1 if kind == LOG_RETURN else 0
        opens = pd.to_datetime([datetime.combine(stamp.date(), session_open) for stamp in stamps.iloc[boundaries]])
        first_seconds = (stamps.iloc[boundaries].to_numpy() - opens.to_numpy()) / np.timedelta64(1, 's')
        offsets = np.rint(first_seconds / grid_step).astype(np.int64) - shift

        last_seconds = ((stamps - stamps.dt.normalize()).dt.total_seconds().to_numpy()
                        - (session_open.hour * 3600 + session_open.minute * 60 + session_open.second))
        bucket_count = int(np.rint(last_seconds.max() / grid_step)) - shift + 1

        return SampledSeries(
            values=values.to_numpy(dtype=float),
            grid_step=float(grid_step),
            day_boundaries=boundaries,
            kind=kind,
            dates=[stamp.date() for stamp in stamps.iloc[boundaries]],
            day_offsets=offsets,
            bucket_count=bucket_count,
            session_open=session_open
        )


# Global instance for use across the application
ingest_service = IngestService()
