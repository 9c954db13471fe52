"""
Quote and sampled-series domain types

Raw best bid/ask ticks are grouped into trading days, forward filled to a
per-second mid-quote series and finally sampled on a regular grid.
"""
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import List, Optional

import numpy as np
import pandas as pd

from src.errors import ValidationError

LOG_PRICE = 'log-price'
LOG_RETURN = 'log-return'
SERIES_KINDS = (LOG_PRICE, LOG_RETURN)


@dataclass(frozen=True)
class QuoteTick:
    timestamp: datetime
    bid: float
    ask: float

    @property
    def mid(self) -> float:
        return (self.bid + self.ask) / 2.0

    def to_dict(self):
        return {
            'timestamp': self.timestamp.isoformat(),
            'bid': self.bid,
            'ask': self.ask
        }


@dataclass
class TradingDay:
    date: date
    session_open: time
    session_close: time
    ticks: List[QuoteTick] = field(default_factory=list)

    @property
    def open_datetime(self) -> datetime:
        return datetime.combine(self.date, self.session_open)

    @property
    def close_datetime(self) -> datetime:
        return datetime.combine(self.date, self.session_close)

    @property
    def session_seconds(self) -> int:
        return int((self.close_datetime - self.open_datetime).total_seconds())

    @property
    def first_tick_time(self) -> Optional[datetime]:
        return self.ticks[0].timestamp if self.ticks else None

    def to_dict(self):
        return {
            'date': self.date.isoformat(),
            'session_open': self.session_open.isoformat(),
            'session_close': self.session_close.isoformat(),
            'tick_count': len(self.ticks),
            'first_tick': self.first_tick_time.isoformat() if self.ticks else None
        }


@dataclass
class SecondSeries:
    """Forward-filled mid-quote price for every second from the first tick to the close"""
    date: date
    start: datetime
    prices: np.ndarray
    session_open: time
    session_close: time

    def __len__(self):
        return len(self.prices)

    @property
    def offset_seconds(self) -> int:
        """Seconds between the session open and the first priced second"""
        return int((self.start - datetime.combine(self.date, self.session_open)).total_seconds())

    @property
    def session_seconds(self) -> int:
        opened = datetime.combine(self.date, self.session_open)
        closed = datetime.combine(self.date, self.session_close)
        return int((closed - opened).total_seconds())

    def to_dict(self):
        return {
            'date': self.date.isoformat(),
            'start': self.start.isoformat(),
            'length': len(self.prices)
        }


@dataclass
class SegmentStats:
    segment_lengths: np.ndarray
    total_segments: int

    def survival(self, taus) -> np.ndarray:
        """N(tau): number of constant-price segments longer than each tau (seconds)"""
        lengths = np.sort(np.asarray(self.segment_lengths))
        taus = np.asarray(taus, dtype=float)
        return len(lengths) - np.searchsorted(lengths, taus, side='right')

    def to_dict(self):
        return {
            'total_segments': self.total_segments,
            'total_seconds': int(np.sum(self.segment_lengths)),
            'max_length': int(np.max(self.segment_lengths)) if self.total_segments else 0
        }


@dataclass
class SampledSeries:
    """
    Regular-grid log-price or log-return series with calendar metadata.

    day_offsets holds the time-of-day bucket of each day's first value, so
    days that start late keep their remaining values aligned with the
    buckets of complete days.
    """
    values: np.ndarray
    grid_step: float
    day_boundaries: np.ndarray
    kind: str
    dates: List[date]
    day_offsets: np.ndarray
    bucket_count: int
    session_open: time = time(9, 0, 0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.day_boundaries = np.asarray(self.day_boundaries, dtype=np.int64)
        self.day_offsets = np.asarray(self.day_offsets, dtype=np.int64)
        if self.kind not in SERIES_KINDS:
            raise ValidationError(f"Unknown series kind '{self.kind}'")
        if len(self.day_boundaries) == 0 or self.day_boundaries[0] != 0:
            raise ValidationError("day_boundaries must start with 0")
        if np.any(np.diff(self.day_boundaries) <= 0):
            raise ValidationError("day_boundaries must be strictly increasing")
        if self.day_boundaries[-1] >= max(len(self.values), 1) and len(self.values) > 0:
            raise ValidationError("day boundary beyond the end of the series")
        if len(self.dates) != len(self.day_boundaries) or len(self.day_offsets) != len(self.day_boundaries):
            raise ValidationError("dates and day_offsets must have one entry per day")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("series values must be finite")

    def __len__(self):
        return len(self.values)

    @property
    def n_days(self) -> int:
        return len(self.day_boundaries)

    def day_slices(self) -> List[slice]:
        ends = list(self.day_boundaries[1:]) + [len(self.values)]
        return [slice(int(start), int(end)) for start, end in zip(self.day_boundaries, ends)]

    def day_index(self) -> np.ndarray:
        """Day number of every value"""
        return np.searchsorted(self.day_boundaries, np.arange(len(self.values)), side='right') - 1

    def buckets(self) -> np.ndarray:
        """Time-of-day bucket of every value"""
        days = self.day_index()
        return self.day_offsets[days] + np.arange(len(self.values)) - self.day_boundaries[days]

    def timestamps(self) -> List[datetime]:
        """Grid time of each value; a return is stamped at the end of its interval"""
        shift = 1 if self.kind == LOG_RETURN else 0
        days = self.day_index()
        buckets = self.buckets()
        opens = {d: datetime.combine(self.dates[d], self.session_open) for d in range(self.n_days)}
        return [
            opens[d] + timedelta(seconds=float((b + shift) * self.grid_step))
            for d, b in zip(days.tolist(), buckets.tolist())
        ]

    def with_values(self, values) -> 'SampledSeries':
        return SampledSeries(
            values=np.asarray(values, dtype=float),
            grid_step=self.grid_step,
            day_boundaries=self.day_boundaries.copy(),
            kind=self.kind,
            dates=list(self.dates),
            day_offsets=self.day_offsets.copy(),
            bucket_count=self.bucket_count,
            session_open=self.session_open
        )

    @classmethod
    def synthetic(cls, values, grid_step, samples_per_day, start_date='2008-01-02',
                  session_open=time(9, 0, 0), kind=LOG_RETURN) -> 'SampledSeries':
        """Lay a plain array out on a business-day calendar with a fixed count per day"""
        values = np.asarray(values, dtype=float)
        if samples_per_day < 1:
            raise ValidationError("samples_per_day must be at least 1")
        n_days = int(np.ceil(len(values) / samples_per_day)) or 1
        days = pd.bdate_range(start=start_date, periods=n_days)
        return cls(
            values=values,
            grid_step=float(grid_step),
            day_boundaries=np.arange(n_days, dtype=np.int64) * samples_per_day,
            kind=kind,
            dates=[d.date() for d in days],
            day_offsets=np.zeros(n_days, dtype=np.int64),
            bucket_count=samples_per_day,
            session_open=session_open
        )

    def to_dict(self):
        return {
            'kind': self.kind,
            'length': len(self.values),
            'grid_step': self.grid_step,
            'days': self.n_days,
            'bucket_count': self.bucket_count,
            'first_date': self.dates[0].isoformat() if self.dates else None,
            'last_date': self.dates[-1].isoformat() if self.dates else None
        }
