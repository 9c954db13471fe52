"""
Macro Service
Investment-grade spread from bond yields and its comparison with lambda estimates
"""

import logging
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.errors import EmptyJoinError, ValidationError
from src.models.estimates import EstimateSeries
from src.models.macro import ANNUAL, AGGREGATION_RULES, MONTHLY, AggregatedSeries, ComparisonReport, SpreadSeries, YieldSeries

logger = logging.getLogger(__name__)

MIN_COMPARISON_BUCKETS = 4
MIN_SIGNIFICANCE_BUCKETS = 8


class MacroService:
    """Service for bond-spread construction and lambda/spread comparison"""

    @staticmethod
    def load_yields(path) -> YieldSeries:
        """Read a `date,rate` CSV (ISO dates, percent per annum)"""
        try:
            frame = pd.read_csv(path, dtype={'date': str})
        except FileNotFoundError:
            raise ValidationError(f"{path}: file not found")
        if list(frame.columns[:2]) != ['date', 'rate']:
            raise ValidationError(f"{path}: expected header 'date,rate', got {','.join(frame.columns)}")
        dates = pd.to_datetime(frame['date'], format='ISO8601', errors='coerce')
        rates = pd.to_numeric(frame['rate'], errors='coerce')
        bad = dates.isna() | ~np.isfinite(rates)
        if bad.any():
            line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise ValidationError(f"{path}:{line}: unparseable date or rate")
        if not dates.is_monotonic_increasing or dates.duplicated().any():
            raise ValidationError(f"{path}: dates must be strictly increasing")
        return YieldSeries(dates=[d.date() for d in dates], rates=rates.to_numpy(dtype=float), source=str(path))

    @staticmethod
    def investment_grade_spread(aaa: YieldSeries, treasury3y: YieldSeries) -> SpreadSeries:
        """AAA minus 3-year Treasury on the exact dates both series share"""
        if not aaa.dates or not treasury3y.dates:
            raise ValidationError("both yield series must be non-empty")
        left = pd.DataFrame({'date': aaa.dates, 'aaa': aaa.rates})
        right = pd.DataFrame({'date': treasury3y.dates, 'treasury': treasury3y.rates})
        joined = left.merge(right, on='date', how='inner').sort_values('date')
        if joined.empty:
            raise EmptyJoinError("yield series share no dates")
        dropped = len(left) + len(right) - 2 * len(joined)
        if dropped:
            logger.info(f"Spread join kept {len(joined)} dates, {dropped} unmatched rows dropped")
        return SpreadSeries(
            dates=joined['date'].tolist(),
            spread=(joined['aaa'] - joined['treasury']).to_numpy(dtype=float),
            sources=[aaa.source, treasury3y.source]
        )

    @staticmethod
    def aggregate(series: Union[SpreadSeries, EstimateSeries], rule: str = MONTHLY) -> AggregatedSeries:
        """
        Arithmetic mean per calendar bucket; empty buckets are omitted.

        Estimate series are bucketed by window start and only converged
        windows contribute. Annual means weight every observation equally.
        """
        if rule not in AGGREGATION_RULES:
            raise ValidationError(f"Unknown aggregation rule '{rule}'")
        if isinstance(series, EstimateSeries):
            rows = [(r.window[0], r.params.lam) for r in series.results if r.converged and r.window[0] is not None]
            dates = [d for d, _ in rows]
            values = [v for _, v in rows]
        else:
            dates, values = list(series.dates), list(series.spread)
        if not dates:
            raise ValidationError("cannot aggregate an empty series")

        frequency = 'M' if rule == MONTHLY else 'Y'
        periods = pd.DatetimeIndex(pd.to_datetime(dates)).to_period(frequency)
        grouped = pd.Series(values, index=periods, dtype=float).groupby(level=0).agg(['mean', 'count'])
        return AggregatedSeries(
            rule=rule,
            buckets=[str(p) for p in grouped.index],
            values=grouped['mean'].to_numpy(),
            counts=grouped['count'].to_numpy()
        )

    @staticmethod
    def compare(lambda_series: AggregatedSeries, spread_series: AggregatedSeries,
                sources=None) -> ComparisonReport:
        """Pearson correlation over aligned buckets; p-value only from 8 buckets on"""
        left = pd.Series(lambda_series.values, index=lambda_series.buckets)
        right = pd.Series(spread_series.values, index=spread_series.buckets)
        aligned = pd.concat([left.rename('lambda_mean'), right.rename('spread_mean')], axis=1, join='inner')
        if len(aligned) < MIN_COMPARISON_BUCKETS:
            raise ValidationError(
                f"only {len(aligned)} aligned buckets, at least {MIN_COMPARISON_BUCKETS} needed"
            )
        result = stats.pearsonr(aligned['lambda_mean'], aligned['spread_mean'])
        p_value: Optional[float] = float(result.pvalue) if len(aligned) >= MIN_SIGNIFICANCE_BUCKETS else None
        return ComparisonReport(
            pearson=float(result.statistic),
            bucket_count=len(aligned),
            buckets=aligned.index.tolist(),
            lambda_means=aligned['lambda_mean'].to_numpy(),
            spread_means=aligned['spread_mean'].to_numpy(),
            p_value=p_value,
            sources=list(sources or [])
        )

    @staticmethod
    def load_lambda_table(path) -> pd.DataFrame:
        """Long-format `stock,year,lambda` table of per-stock annual estimates"""
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise ValidationError(f"{path}: file not found")
        missing = {'stock', 'year', 'lambda'} - set(frame.columns)
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        frame['lambda'] = pd.to_numeric(frame['lambda'], errors='coerce')
        frame['year'] = pd.to_numeric(frame['year'], errors='coerce')
        if frame[['lambda', 'year']].isna().any().any():
            raise ValidationError(f"{path}: non-numeric year or lambda")
        frame['year'] = frame['year'].astype(int)
        return frame[['stock', 'year', 'lambda']]

    @staticmethod
    def ensemble_by_year(table: pd.DataFrame) -> pd.DataFrame:
        """Mean and sample standard deviation of lambda across stocks, per year"""
        if table.empty:
            raise ValidationError("lambda table is empty")
        grouped = table.groupby('year')['lambda'].agg(['mean', 'std', 'count']).reset_index()
        grouped.columns = ['year', 'lambda_mean', 'lambda_sd', 'stocks']
        return grouped

    @staticmethod
    def ensemble_as_aggregated(ensemble: pd.DataFrame) -> AggregatedSeries:
        return AggregatedSeries(
            rule=ANNUAL,
            buckets=[str(y) for y in ensemble['year']],
            values=ensemble['lambda_mean'].to_numpy(dtype=float),
            counts=ensemble['stocks'].to_numpy()
        )

    @staticmethod
    def load_spread(path) -> SpreadSeries:
        """Read back a `date,spread` CSV written by spread_frame"""
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise ValidationError(f"{path}: file not found")
        if list(frame.columns[:2]) != ['date', 'spread']:
            raise ValidationError(f"{path}: expected header 'date,spread'")
        dates = pd.to_datetime(frame['date'], format='ISO8601', errors='coerce')
        spread = pd.to_numeric(frame['spread'], errors='coerce')
        bad = (dates.isna() | ~np.isfinite(spread)).to_numpy()
        if bad.any():
            line = int(np.flatnonzero(bad)[0]) + 2
            raise ValidationError(f"{path}:{line}: unparseable date or spread")
        return SpreadSeries(dates=[d.date() for d in dates], spread=spread.to_numpy(dtype=float),
                            sources=[str(path)])

    @staticmethod
    def spread_frame(series: SpreadSeries) -> pd.DataFrame:
        return pd.DataFrame({
            'date': [d.isoformat() for d in series.dates],
            'spread': series.spread
        })

    @staticmethod
    def aggregated_frame(series: AggregatedSeries) -> pd.DataFrame:
        return pd.DataFrame({'bucket': series.buckets, 'value': series.values, 'count': series.counts})

    @staticmethod
    def comparison_frame(report: ComparisonReport) -> pd.DataFrame:
        return pd.DataFrame({
            'bucket': report.buckets,
            'lambda_mean': report.lambda_means,
            'spread_mean': report.spread_means
        })


# Global instance for use across the application
macro_service = MacroService()
