"""
Report Service
Figure-equivalent data tables and minimal static SVG renderings

Every plotted number comes from a DataFrame that is also written as CSV.
"""

import logging
from typing import Dict, Optional

import matplotlib

matplotlib.use('Agg')

import numpy as np
import pandas as pd
from matplotlib import rcParams
from matplotlib.figure import Figure

from src.errors import ValidationError
from src.models.estimates import EstimateSeries
from src.services.mrw_service import mrw_service

logger = logging.getLogger(__name__)

rcParams['svg.hashsalt'] = 'mrwlab'
rcParams['svg.fonttype'] = 'none'

#: exponent of a monofractal Brownian reference: zeta(q) = q/2
BROWNIAN_HURST = 0.5


class ReportService:
    """Builds the tables behind each figure panel and renders them"""

    # Figure data

    @staticmethod
    def survival_panel(frame: pd.DataFrame) -> pd.DataFrame:
        """N(tau) of constant-price segments, log-log"""
        return frame[frame['count'] > 0].reset_index(drop=True)

    @staticmethod
    def zeta_panel(frame: pd.DataFrame, lam: float) -> pd.DataFrame:
        """Empirical zeta next to the fitted MRW curve and the q/2 line of a Brownian walk"""
        q = frame['q'].to_numpy(dtype=float)
        return pd.DataFrame({
            'q': q,
            'zeta_empirical': frame['zeta'].to_numpy(dtype=float),
            'stderr': frame['stderr'].to_numpy(dtype=float),
            'zeta_mrw': mrw_service.theoretical_zeta(lam, q),
            'zeta_brownian': BROWNIAN_HURST * q
        })

    @staticmethod
    def lambda_by_window_panel(estimates: EstimateSeries) -> pd.DataFrame:
        """One row per window with lambda and sigma"""
        rows = []
        for number, result in enumerate(estimates.results, start=1):
            start = result.window[0]
            rows.append({
                'window': number,
                'label': start.strftime('%Y-%m') if start is not None else str(number),
                'lambda': result.params.lam,
                'sigma': result.params.sigma,
                'converged': result.converged
            })
        return pd.DataFrame(rows, columns=['window', 'label', 'lambda', 'sigma', 'converged'])

    @staticmethod
    def range_histogram_panel(ranges, bins: int = 30) -> pd.DataFrame:
        ranges = np.asarray(ranges, dtype=float)
        if len(ranges) == 0:
            raise ValidationError("no ranges to histogram")
        counts, edges = np.histogram(ranges, bins=bins)
        return pd.DataFrame({'left': edges[:-1], 'right': edges[1:], 'count': counts})

    @staticmethod
    def lambda_table_wide(table: pd.DataFrame, ensemble: pd.DataFrame) -> pd.DataFrame:
        """Stocks as rows, years as columns, ensemble mean and sd appended"""
        wide = table.pivot_table(index='stock', columns='year', values='lambda', aggfunc='mean')
        wide.loc['ensemble mean'] = ensemble.set_index('year')['lambda_mean']
        wide.loc['ensemble sd'] = ensemble.set_index('year')['lambda_sd']
        wide.columns = [str(c) for c in wide.columns]
        return wide.reset_index()

    # Rendering

    @staticmethod
    def line_figure(frame: pd.DataFrame, x: str, ys, title: str = '', xlabel: Optional[str] = None,
                    ylabel: str = '', logx: bool = False, logy: bool = False, markers: bool = True,
                    errors: Optional[Dict[str, str]] = None) -> Figure:
        """One axes, one line per y column; optional error bars keyed by y column"""
        figure = Figure(figsize=(6.0, 4.0))
        axes = figure.add_subplot(1, 1, 1)
        errors = errors or {}
        for column in ([ys] if isinstance(ys, str) else ys):
            if column in errors:
                axes.errorbar(frame[x], frame[column], yerr=frame[errors[column]], fmt='o-', capsize=3, label=column)
            else:
                axes.plot(frame[x], frame[column], 'o-' if markers else '-', markersize=3, label=column)
        if logx:
            axes.set_xscale('log')
        if logy:
            axes.set_yscale('log')
        axes.set_xlabel(xlabel or x)
        axes.set_ylabel(ylabel)
        axes.set_title(title)
        if not isinstance(ys, str) and len(ys) > 1:
            axes.legend()
        figure.tight_layout()
        return figure

    @staticmethod
    def band_figure(frame: pd.DataFrame, x: str, y: str, band: str, title: str = '') -> Figure:
        """Autocorrelation-style plot with a symmetric +-band"""
        figure = Figure(figsize=(6.0, 4.0))
        axes = figure.add_subplot(1, 1, 1)
        axes.plot(frame[x], frame[y], '.', markersize=3)
        axes.plot(frame[x], frame[band], '--', color='grey')
        axes.plot(frame[x], -frame[band], '--', color='grey')
        axes.set_xlabel(x)
        axes.set_ylabel(y)
        axes.set_title(title)
        figure.tight_layout()
        return figure

    @staticmethod
    def histogram_figure(frame: pd.DataFrame, marks: Optional[Dict[str, float]] = None, title: str = '') -> Figure:
        figure = Figure(figsize=(6.0, 4.0))
        axes = figure.add_subplot(1, 1, 1)
        axes.bar(frame['left'], frame['count'], width=frame['right'] - frame['left'], align='edge',
                 color='lightgrey', edgecolor='black')
        for label, value in (marks or {}).items():
            axes.axvline(value, linestyle='--', label=label)
        if marks:
            axes.legend()
        axes.set_xlabel('range of lambda estimates')
        axes.set_ylabel('count')
        axes.set_title(title)
        figure.tight_layout()
        return figure

    @staticmethod
    def curves_figure(frame: pd.DataFrame, observed: Optional[pd.DataFrame] = None, title: str = '') -> Figure:
        """Per-segment lambda curves of null members with the observed curve on top"""
        figure = Figure(figsize=(6.0, 4.0))
        axes = figure.add_subplot(1, 1, 1)
        for member, curve in frame.groupby('member'):
            axes.plot(curve['segment'], curve['lambda'], '-', color='grey', linewidth=0.8)
        if observed is not None and not observed.empty:
            axes.plot(observed['window'], observed['lambda'], 'o-', color='black', label='observed')
            axes.legend()
        axes.set_xlabel('segment')
        axes.set_ylabel('lambda')
        axes.set_title(title)
        figure.tight_layout()
        return figure


# Global instance for use across the application
report_service = ReportService()
