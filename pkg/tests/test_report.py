import numpy as np
import pandas as pd
import pytest

from src.errors import ValidationError
from src.main import EXIT_OK, main
from src.services.report_service import ReportService

service = ReportService()


def test_zeta_panel_columns():
    frame = pd.DataFrame({'q': [1.0, 2.0, 3.0], 'zeta': [0.55, 1.0, 1.4], 'stderr': [0.01] * 3, 'r2': [1.0] * 3})
    panel = service.zeta_panel(frame, 0.49)
    assert list(panel.columns) == ['q', 'zeta_empirical', 'stderr', 'zeta_mrw', 'zeta_brownian']
    assert panel['zeta_mrw'].iloc[1] == pytest.approx(1.0)
    assert panel['zeta_brownian'].tolist() == [0.5, 1.0, 1.5]


def test_range_histogram():
    panel = service.range_histogram_panel(np.linspace(0.0, 1.0, 101), bins=10)
    assert len(panel) == 10
    assert panel['count'].sum() == 101
    with pytest.raises(ValidationError):
        service.range_histogram_panel([])


def test_lambda_table_wide():
    table = pd.DataFrame({'stock': ['A', 'B', 'A', 'B'], 'year': [2007, 2007, 2008, 2008],
                          'lambda': [0.4, 0.6, 0.3, 0.5]})
    ensemble = pd.DataFrame({'year': [2007, 2008], 'lambda_mean': [0.5, 0.4], 'lambda_sd': [0.14, 0.14],
                             'stocks': [2, 2]})
    wide = service.lambda_table_wide(table, ensemble)
    assert list(wide.columns) == ['stock', '2007', '2008']
    assert wide['stock'].tolist() == ['A', 'B', 'ensemble mean', 'ensemble sd']
    assert wide.loc[2, '2008'] == pytest.approx(0.4)


def test_survival_panel_drops_empty_counts():
    frame = pd.DataFrame({'tau': [1.0, 10.0, 100.0], 'count': [5, 2, 0]})
    assert service.survival_panel(frame)['tau'].tolist() == [1.0, 10.0]


def test_report_command(tmp_path):
    rng = np.random.default_rng(4)
    inputs = tmp_path / 'in'
    inputs.mkdir()
    pd.DataFrame({'rank': np.arange(1, 201), 'range': np.sort(rng.uniform(0.0, 0.4, 200))}).to_csv(
        inputs / 'distribution.csv', index=False)
    years = np.arange(2003, 2009)
    pd.DataFrame([
        {'stock': stock, 'year': year, 'lambda': 0.4 + 0.02 * (year - 2003) + offset}
        for stock, offset in (('NHY', 0.0), ('STL', 0.05), ('TEL', -0.03))
        for year in years
    ]).to_csv(inputs / 'lambda_table.csv', index=False)
    dates = pd.bdate_range('2003-01-02', '2008-12-31')
    pd.DataFrame({'date': dates.strftime('%Y-%m-%d'),
                  'spread': 2.0 - 0.1 * (dates.year - 2003) + 0.01 * rng.standard_normal(len(dates))}).to_csv(
        inputs / 'spread.csv', index=False)

    out = tmp_path / 'report'
    code = main(['report', '--distribution', str(inputs / 'distribution.csv'), '--observed-range', '0.35',
                 '--lambda-table', str(inputs / 'lambda_table.csv'), '--spread', str(inputs / 'spread.csv'),
                 '--output', str(out)], config_name='testing')
    assert code == EXIT_OK
    for name in ('panel_null_ranges', 'panel_lambda_by_stock', 'panel_ensemble_lambda',
                 'panel_spread_monthly', 'panel_lambda_vs_spread'):
        assert (out / f'{name}.csv').exists()
        assert (out / f'{name}.svg').read_text().lstrip().startswith('<?xml')
    comparison = pd.read_csv(out / 'panel_lambda_vs_spread.csv')
    assert len(comparison) == 6
    assert np.corrcoef(comparison['lambda_mean'], comparison['spread_mean'])[0, 1] < -0.9
    annual = pd.read_excel(out / 'tables.xlsx', sheet_name='annual lambda')
    assert annual['stock'].tolist()[-2:] == ['ensemble mean', 'ensemble sd']
