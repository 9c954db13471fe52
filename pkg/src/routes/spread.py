"""
spread: investment-grade spread and its correlation with lambda estimates
"""

import logging

from src.models.macro import AGGREGATION_RULES, ANNUAL, MONTHLY
from src.routes.common import add_common_arguments
from src.services.macro_service import MacroService
from src.services.mle_service import MleService

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('spread', help='AAA minus 3-year Treasury spread and lambda comparison')
    add_common_arguments(parser)
    parser.add_argument('--aaa', help='date,rate CSV of AAA corporate yields')
    parser.add_argument('--treasury', help='date,rate CSV of 3-year Treasury yields')
    parser.add_argument('--estimates', help='estimates CSV to compare against')
    parser.add_argument('--lambda-table', help='stock,year,lambda CSV of per-stock annual estimates')
    parser.add_argument('--aggregate', choices=AGGREGATION_RULES, help='bucket for the estimates comparison')
    parser.set_defaults(handler=run_spread)
    return parser


def run_spread(run_config, writer, settings):
    macro = MacroService()
    aaa = macro.load_yields(run_config.aaa)
    treasury = macro.load_yields(run_config.treasury)
    spread = macro.investment_grade_spread(aaa, treasury)
    sources = [str(run_config.aaa), str(run_config.treasury)]

    writer.csv('spread.csv', macro.spread_frame(spread))
    aggregated = {rule: macro.aggregate(spread, rule) for rule in (MONTHLY, ANNUAL)}
    for rule, series in aggregated.items():
        writer.csv(f'spread_{rule}.csv', macro.aggregated_frame(series))

    summary = {'observations': len(spread.dates), 'aaa_source': sources[0], 'treasury_source': sources[1]}
    if run_config.estimates is not None:
        estimates = MleService.read_estimates(run_config.estimates)
        lambdas = macro.aggregate(estimates, run_config.aggregate)
        report = macro.compare(lambdas, aggregated[run_config.aggregate], sources)
        writer.csv('comparison.csv', macro.comparison_frame(report))
        summary.update({'pearson': report.pearson, 'buckets': report.bucket_count, 'p_value': report.p_value})

    if run_config.lambda_table is not None:
        ensemble = macro.ensemble_by_year(macro.load_lambda_table(run_config.lambda_table))
        writer.csv('ensemble_by_year.csv', ensemble)
        report = macro.compare(macro.ensemble_as_aggregated(ensemble), aggregated[ANNUAL], sources)
        writer.csv('comparison_annual.csv', macro.comparison_frame(report))
        summary.update({
            'ensemble_pearson': report.pearson,
            'ensemble_buckets': report.bucket_count,
            'ensemble_p_value': report.p_value
        })

    writer.key_values('comparison.txt', summary)
    return {}
