from datetime import date, datetime, timedelta

import numpy as np
import pandas as pd
import pytest

from src.errors import EmptyJoinError, ValidationError
from src.models.estimates import CALENDAR_MONTH, EstimateSeries, FitResult
from src.models.macro import ANNUAL, MONTHLY, AggregatedSeries, SpreadSeries, YieldSeries
from src.models.mrw import MrwParams
from src.services.macro_service import MacroService

service = MacroService()


def yields(dates, rates, source=''):
    return YieldSeries(dates=list(dates), rates=np.asarray(rates, dtype=float), source=source)


def business_days(start, periods):
    return [d.date() for d in pd.bdate_range(start=start, periods=periods)]


def aggregated(buckets, values):
    return AggregatedSeries(MONTHLY, list(buckets), np.asarray(values, dtype=float), np.ones(len(values)))


class TestLoadYields:

    def test_reads_rates(self, tmp_path):
        path = tmp_path / 'aaa.csv'
        path.write_text('date,rate\n2008-01-02,5.5\n2008-01-03,5.6\n')
        series = service.load_yields(path)
        assert series.dates == [date(2008, 1, 2), date(2008, 1, 3)]
        assert series.rates.tolist() == [5.5, 5.6]
        assert series.source == str(path)

    def test_bad_row_reports_line(self, tmp_path):
        path = tmp_path / 'aaa.csv'
        path.write_text('date,rate\n2008-01-02,5.5\n2008-01-03,n/a\n')
        with pytest.raises(ValidationError, match=':3:'):
            service.load_yields(path)

    def test_dates_must_increase(self, tmp_path):
        path = tmp_path / 'aaa.csv'
        path.write_text('date,rate\n2008-01-03,5.5\n2008-01-02,5.6\n')
        with pytest.raises(ValidationError):
            service.load_yields(path)

    def test_header(self, tmp_path):
        path = tmp_path / 'aaa.csv'
        path.write_text('day,yield\n2008-01-02,5.5\n')
        with pytest.raises(ValidationError):
            service.load_yields(path)


class TestSpread:

    def test_difference(self):
        spread = service.investment_grade_spread(
            yields([date(2008, 1, 2)], [5.5], 'aaa'), yields([date(2008, 1, 2)], [2.0], 'dgs3')
        )
        assert spread.spread.tolist() == [3.5]
        assert spread.sources == ['aaa', 'dgs3']

    def test_identical_series_give_zero(self):
        dates = business_days('2008-01-02', 30)
        rates = np.linspace(4.0, 5.0, 30)
        spread = service.investment_grade_spread(yields(dates, rates), yields(dates, rates))
        assert np.all(spread.spread == 0.0)

    def test_swapping_negates(self):
        dates = business_days('2008-01-02', 10)
        a, b = yields(dates, np.arange(10.0) + 5.0), yields(dates, np.arange(10.0) ** 0.5)
        assert np.array_equal(service.investment_grade_spread(a, b).spread,
                              -service.investment_grade_spread(b, a).spread)

    def test_only_shared_dates(self):
        a = yields([date(2008, 1, 2), date(2008, 1, 3), date(2008, 1, 4)], [5.0, 5.1, 5.2])
        b = yields([date(2008, 1, 3), date(2008, 1, 4), date(2008, 1, 7)], [2.0, 2.0, 2.0])
        spread = service.investment_grade_spread(a, b)
        assert spread.dates == [date(2008, 1, 3), date(2008, 1, 4)]
        assert np.allclose(spread.spread, [3.1, 3.2])

    def test_disjoint_dates(self):
        with pytest.raises(EmptyJoinError):
            service.investment_grade_spread(yields([date(2008, 1, 2)], [5.0]), yields([date(2008, 1, 3)], [2.0]))


class TestAggregate:

    def test_constant_series(self):
        dates = business_days('2008-01-02', 300)
        result = service.aggregate(SpreadSeries(dates, np.full(300, 2.5)), MONTHLY)
        assert np.all(result.values == 2.5)
        assert result.buckets[0] == '2008-01'
        assert int(result.counts.sum()) == 300

    def test_monthly_ramp_midpoint(self):
        dates = [date(2008, 1, 1) + timedelta(days=k) for k in range(31)]
        result = service.aggregate(SpreadSeries(dates, np.arange(31.0)), MONTHLY)
        assert result.buckets == ['2008-01']
        assert result.values[0] == pytest.approx(15.0)

    def test_annual_weights_observations(self):
        dates = [date(2008, 1, 2), date(2008, 1, 3), date(2008, 7, 1), date(2009, 1, 2)]
        result = service.aggregate(SpreadSeries(dates, np.array([1.0, 1.0, 4.0, 7.0])), ANNUAL)
        assert result.buckets == ['2008', '2009']
        assert result.values.tolist() == [2.0, 7.0]
        assert result.counts.tolist() == [3, 1]

    def test_estimates_bucketed_by_window_start(self):
        starts = [datetime(2008, 1, 2, 9, 2), datetime(2008, 2, 1, 9, 2), datetime(2008, 3, 3, 9, 2)]
        results = [
            FitResult(MrwParams(lam, 1.0, 100.0, 1.0), -1.0, 100, ok, 1, window=(start, start))
            for lam, ok, start in zip([0.4, 0.9, 0.6], [True, False, True], starts)
        ]
        result = service.aggregate(EstimateSeries(results, CALENDAR_MONTH), MONTHLY)
        assert result.buckets == ['2008-01', '2008-03']
        assert result.values.tolist() == [0.4, 0.6]

    def test_unknown_rule(self):
        with pytest.raises(ValidationError):
            service.aggregate(SpreadSeries([date(2008, 1, 2)], np.ones(1)), 'weekly')


class TestCompare:

    def test_negated_affine_pair(self):
        buckets = [f'2008-{m:02d}' for m in range(1, 7)]
        values = np.array([0.3, 0.5, 0.4, 0.6, 0.2, 0.45])
        report = service.compare(aggregated(buckets, values), aggregated(buckets, 2.0 - 3.0 * values))
        assert report.pearson == pytest.approx(-1.0)
        assert report.bucket_count == 6
        assert report.p_value is None

    def test_p_value_from_eight_buckets(self, rng):
        buckets = [f'2008-{m:02d}' for m in range(1, 13)]
        report = service.compare(aggregated(buckets, rng.standard_normal(12)),
                                 aggregated(buckets, rng.standard_normal(12)))
        assert report.p_value is not None
        assert 0.0 <= report.p_value <= 1.0

    def test_only_aligned_buckets(self):
        left = aggregated(['2008-01', '2008-02', '2008-03', '2008-04', '2008-05'], [1, 2, 3, 4, 5])
        right = aggregated(['2008-02', '2008-03', '2008-04', '2008-05', '2008-06'], [2, 4, 6, 8, 10])
        report = service.compare(left, right)
        assert report.buckets == ['2008-02', '2008-03', '2008-04', '2008-05']
        assert report.pearson == pytest.approx(1.0)

    def test_too_few_buckets(self):
        buckets = ['2008-01', '2008-02', '2008-03']
        with pytest.raises(ValidationError):
            service.compare(aggregated(buckets, [1, 2, 3]), aggregated(buckets, [3, 1, 2]))


class TestLambdaTable:

    def test_ensemble_by_year(self, tmp_path):
        path = tmp_path / 'lambda_table.csv'
        path.write_text('stock,year,lambda\nA,2007,0.4\nB,2007,0.6\nC,2007,0.5\nA,2008,0.3\nB,2008,0.3\n')
        ensemble = service.ensemble_by_year(service.load_lambda_table(path))
        assert list(ensemble.columns) == ['year', 'lambda_mean', 'lambda_sd', 'stocks']
        first = ensemble.iloc[0]
        assert first['year'] == 2007
        assert first['lambda_mean'] == pytest.approx(0.5)
        assert first['lambda_sd'] == pytest.approx(0.1)
        assert ensemble.iloc[1]['lambda_sd'] == pytest.approx(0.0)
        series = service.ensemble_as_aggregated(ensemble)
        assert series.rule == ANNUAL
        assert series.buckets == ['2007', '2008']

    def test_missing_column(self, tmp_path):
        path = tmp_path / 'lambda_table.csv'
        path.write_text('stock,lambda\nA,0.4\n')
        with pytest.raises(ValidationError):
            service.load_lambda_table(path)
