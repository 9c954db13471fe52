"""
report: figure-equivalent CSVs, static SVG renderings and Excel tables

Every input is optional; each panel is produced when its inputs are present.
A zeta file from `scaling` pulls in its zeta_difference.csv and
zeta_monofractal.csv siblings when they exist.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from src.errors import ConfigValidationError
from src.models.scaling import WAVELET, ScalingReport
from src.routes.common import add_common_arguments
from src.services.macro_service import MacroService
from src.services.mctest_service import range_of_estimates
from src.services.mle_service import MleService
from src.services.report_service import ReportService
from src.services.scaling_service import ScalingService

logger = logging.getLogger(__name__)

REPORT_INPUTS = ('survival', 'acf', 'profile', 'spectrum', 'zeta', 'estimates', 'distribution',
                 'curves', 'lambda_table', 'spread')


def register(subparsers):
    parser = subparsers.add_parser('report', help='Emit figure data, SVG plots and Excel tables')
    add_common_arguments(parser)
    parser.add_argument('--survival', help='survival.csv from ingest')
    parser.add_argument('--acf', help='acf CSV from deseason')
    parser.add_argument('--profile', help='profile.csv from deseason')
    parser.add_argument('--spectrum', help='spectrum.csv from scaling')
    parser.add_argument('--zeta', help='zeta_wavelet.csv from scaling')
    parser.add_argument('--estimates', help='estimates.csv from fit')
    parser.add_argument('--distribution', help='distribution.csv from mc-test')
    parser.add_argument('--curves', help='curves.csv from mc-test')
    parser.add_argument('--lambda-table', help='stock,year,lambda CSV')
    parser.add_argument('--spread', help='spread.csv from spread')
    parser.add_argument('--lambda', dest='lam', type=float, help='lambda of the MRW curve in the zeta panel')
    parser.add_argument('--observed-range', type=float, help='observed range mark when no estimates are given')
    parser.set_defaults(handler=run_report)
    return parser


def run_report(run_config, writer, settings):
    if not any(getattr(run_config, name) is not None for name in REPORT_INPUTS):
        raise ConfigValidationError(f"report needs at least one of: {', '.join(REPORT_INPUTS)}")

    report = ReportService()
    macro = MacroService()
    tables = {}

    def emit(name, frame, figure):
        writer.csv(f'{name}.csv', frame)
        writer.svg(f'{name}.svg', figure)

    # market microstructure
    if run_config.survival is not None:
        frame = report.survival_panel(pd.read_csv(run_config.survival))
        emit('panel_survival', frame, report.line_figure(
            frame, 'tau', 'count', title='Constant-price segments longer than tau',
            xlabel='tau (s)', ylabel='N(tau)', logx=True, logy=True))

    # correlation, smile, spectrum
    if run_config.acf is not None:
        frame = pd.read_csv(run_config.acf)
        emit('panel_acf', frame, report.band_figure(frame, 'lag', 'acf', 'band', title='Autocorrelation'))
    if run_config.profile is not None:
        frame = pd.read_csv(run_config.profile)
        emit('panel_profile', frame, report.line_figure(
            frame, 'bucket', 'value', title='Intraday volatility profile', ylabel='mean |return|'))
    if run_config.spectrum is not None:
        frame = pd.read_csv(run_config.spectrum)
        emit('panel_spectrum', frame, report.line_figure(
            frame, 'frequency', 'power', title='Power spectrum', xlabel='frequency (Hz)',
            logx=True, logy=True, markers=False))

    # scaling function, lambda by window, null ensemble
    if run_config.zeta is not None:
        frame = _zeta_panel(report, run_config)
        emit('panel_zeta', frame, report.line_figure(
            frame, 'q', [c for c in frame.columns if c.startswith('zeta_')], title='Scaling function',
            ylabel='zeta(q)'))

    estimates = None
    if run_config.estimates is not None:
        estimates = MleService.read_estimates(run_config.estimates, dt=run_config.step)
        frame = report.lambda_by_window_panel(estimates)
        tables['window estimates'] = frame
        emit('panel_lambda_by_window', frame, report.line_figure(
            frame, 'window', 'lambda', title='Lambda per window', ylabel='lambda'))

    if run_config.curves is not None:
        frame = pd.read_csv(run_config.curves)
        observed = report.lambda_by_window_panel(estimates) if estimates is not None else None
        emit('panel_null_curves', frame, report.curves_figure(frame, observed, title='Lambda per segment'))

    if run_config.distribution is not None:
        ranges = pd.read_csv(run_config.distribution)['range'].to_numpy(dtype=float)
        marks = {
            'q025': float(np.quantile(ranges, 0.025)),
            'q975': float(np.quantile(ranges, 0.975))
        }
        if estimates is not None and len(estimates.lambdas()):
            marks['observed'] = range_of_estimates(estimates.lambdas())
        elif run_config.observed_range is not None:
            marks['observed'] = run_config.observed_range
        frame = report.range_histogram_panel(ranges)
        emit('panel_null_ranges', frame, report.histogram_figure(frame, marks, title='Null distribution of ranges'))

    # per-stock lambda and the bond spread
    ensemble = None
    if run_config.lambda_table is not None:
        table = macro.load_lambda_table(run_config.lambda_table)
        ensemble = macro.ensemble_by_year(table)
        wide = table.pivot_table(index='year', columns='stock', values='lambda', aggfunc='mean').reset_index()
        wide.columns = [str(c) for c in wide.columns]
        emit('panel_lambda_by_stock', wide, report.line_figure(
            wide, 'year', [c for c in wide.columns if c != 'year'], title='Lambda per stock', ylabel='lambda'))
        emit('panel_ensemble_lambda', ensemble, report.line_figure(
            ensemble, 'year', ['lambda_mean'], title='Ensemble lambda', ylabel='lambda',
            errors={'lambda_mean': 'lambda_sd'}))
        tables['annual lambda'] = report.lambda_table_wide(table, ensemble)

    if run_config.spread is not None:
        spread = macro.load_spread(run_config.spread)
        monthly = macro.aggregated_frame(macro.aggregate(spread, 'monthly'))
        monthly.insert(0, 'index', np.arange(len(monthly)))
        emit('panel_spread_monthly', monthly, report.line_figure(
            monthly, 'index', 'value', title='Monthly investment-grade spread', xlabel='month',
            ylabel='spread (pp)'))
        if ensemble is not None:
            comparison = macro.compare(macro.ensemble_as_aggregated(ensemble), macro.aggregate(spread, 'annual'))
            frame = macro.comparison_frame(comparison)
            emit('panel_lambda_vs_spread', frame, report.line_figure(
                frame, 'spread_mean', 'lambda_mean', title=f'Annual lambda vs spread (r={comparison.pearson:.2f})',
                xlabel='spread (pp)', ylabel='lambda'))

    if tables:
        writer.excel('tables.xlsx', tables)
    logger.info(f"Report written with {len(writer.written)} artifacts")
    return {}


def _zeta_panel(report, run_config) -> pd.DataFrame:
    wavelet = pd.read_csv(run_config.zeta)
    lam = run_config.lam
    if lam is None:
        fitted = ScalingService.fit_lambda_to_zeta(ScalingReport(
            q_grid=wavelet['q'].to_numpy(dtype=float),
            zeta_hat=wavelet['zeta'].to_numpy(dtype=float),
            stderr=wavelet['stderr'].to_numpy(dtype=float),
            r2=wavelet['r2'].to_numpy(dtype=float),
            method=WAVELET
        ))
        lam = fitted.lam
    frame = report.zeta_panel(wavelet, lam)
    folder = Path(run_config.zeta).parent
    for method in ('difference', 'monofractal'):
        sibling = folder / f'zeta_{method}.csv'
        if sibling.exists():
            other = pd.read_csv(sibling)
            if np.allclose(other['q'].to_numpy(), frame['q'].to_numpy()):
                frame[f'zeta_{method}'] = other['zeta'].to_numpy(dtype=float)
    return frame

