"""
scaling: power spectrum, structure functions and scaling functions of the
cumulated (deseasonalized) log price
"""

import logging

import numpy as np

from src.models.mrw import MrwParams
from src.models.quotes import LOG_RETURN
from src.models.scaling import DIFFERENCE, WAVELET
from src.routes.common import add_common_arguments
from src.services.ingest_service import IngestService
from src.services.mrw_service import MrwService
from src.services.scaling_service import ScalingService

logger = logging.getLogger(__name__)

#: stream of the monofractal reference walk, apart from simulate's stream 0
REFERENCE_STREAM = 1


def register(subparsers):
    parser = subparsers.add_parser('scaling', help='Estimate zeta(q) and lambda from structure functions')
    add_common_arguments(parser)
    parser.add_argument('--returns', help='(deseasonalized) sampled log-return CSV')
    parser.add_argument('--q-grid', help='comma-separated moment orders')
    parser.add_argument('--method', choices=(WAVELET, DIFFERENCE), help='method used for the lambda fit')
    parser.add_argument('--scale-min', type=float, help='smallest scale in grid steps')
    parser.add_argument('--scale-max', type=float, help='largest scale in grid steps')
    parser.set_defaults(handler=run_scaling)
    return parser


def run_scaling(run_config, writer, settings):
    ingest = IngestService(settings)
    scaling = ScalingService(settings)

    returns = ingest.read_sampled_series(run_config.returns, LOG_RETURN, session_open=run_config.session_open)
    path = ingest.integrated_path(returns)
    n = len(path)
    q_grid = np.asarray(run_config.q_grid, dtype=float)

    spectrum = scaling.psd(path, returns.grid_step)
    writer.csv('spectrum.csv', scaling.spectrum_frame(spectrum))

    reports = {}
    for method, compute in (
        (WAVELET, scaling.wavelet_structure_functions),
        (DIFFERENCE, scaling.difference_structure_functions)
    ):
        scales = scaling.default_scales(n, method, run_config.scale_min, run_config.scale_max)
        sf = compute(path, q_grid, scales)
        reports[method] = scaling.fit_scaling_function(sf)
        writer.csv(f'structure_{method}.csv', scaling.structure_frame(sf))
        writer.csv(f'zeta_{method}.csv', scaling.report_frame(reports[method]))

    # wavelet analysis of a plain random walk of the same length
    seed = run_config.seed if run_config.seed is not None else 0
    reference_params = MrwParams(lam=0.0, sigma=1.0, T=float(n), dt=1.0)
    walk = MrwService(settings).simulate_mrw(reference_params, n - 1, seed, REFERENCE_STREAM).cumulative()
    reference_scales = scaling.default_scales(n, WAVELET, run_config.scale_min, run_config.scale_max)
    reference = scaling.fit_scaling_function(scaling.wavelet_structure_functions(walk, q_grid, reference_scales))
    writer.csv('zeta_monofractal.csv', scaling.report_frame(reference))

    fit = scaling.fit_lambda_to_zeta(reports[run_config.method])
    day_frequency = 1.0 / (returns.bucket_count * returns.grid_step)
    summary = dict(fit.to_dict())
    summary.update({
        'method': run_config.method,
        'n': n,
        'spectral_slope': scaling.spectral_slope(spectrum, spectrum.frequency[0], spectrum.frequency[-1]),
    })
    if spectrum.frequency[0] < day_frequency < spectrum.frequency[-1]:
        summary['one_day_peak_ratio'] = scaling.peak_ratio(spectrum, day_frequency)
    writer.key_values('scaling_summary.txt', summary)
    logger.info(f"Scaling fit ({run_config.method}): lambda={fit.lam:.4f}")
    return {'reference_walk': {'seed': seed, 'stream': REFERENCE_STREAM}}
