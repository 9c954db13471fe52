import argparse
import logging
import os
import sys
# DON'T CHANGE THIS !!!
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from src.config import get_config
from src.errors import ComputationError, MrwLabError, ValidationError
from src.routes import deseason, fit, ingest, mc_test, report, scaling, simulate, spread
from src.routes.common import package_versions, resolve_run_config
from src.services.artifact_service import ArtifactWriter

logger = logging.getLogger('mrwlab')

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_COMPUTATION = 3

# Subcommands in pipeline order
SUBCOMMANDS = (ingest, deseason, scaling, simulate, fit, mc_test, spread, report)


def create_cli():
    """
    Command-line factory: one subparser per pipeline step
    """
    parser = argparse.ArgumentParser(
        prog='mrwlab',
        description='Multifractal random walk analysis of high-frequency prices'
    )
    subparsers = parser.add_subparsers(dest='subcommand', required=True)
    for module in SUBCOMMANDS:
        module.register(subparsers)
    return parser


def configure_logging(settings):
    logging.basicConfig(
        level=getattr(logging, str(settings.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr
    )


def main(argv=None, config_name=None):
    """Run one subcommand; returns the process exit status"""
    settings = get_config(config_name)
    args = create_cli().parse_args(argv)
    configure_logging(settings)

    try:
        run_config = resolve_run_config(args, settings)
        with ArtifactWriter(run_config.output_dir) as writer:
            seeds = args.handler(run_config, writer, settings) or {}
            writer.manifest(args.subcommand, run_config.to_dict(), package_versions(settings), seeds)
    except ValidationError as e:
        logger.debug(f"{args.subcommand} failed", exc_info=True)
        print(f"mrwlab {args.subcommand}: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ComputationError, MrwLabError) as e:
        logger.debug(f"{args.subcommand} failed", exc_info=True)
        print(f"mrwlab {args.subcommand}: error: {e}", file=sys.stderr)
        return EXIT_COMPUTATION
    except Exception as e:
        logger.debug(f"{args.subcommand} failed", exc_info=True)
        print(f"mrwlab {args.subcommand}: unexpected error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_COMPUTATION

    logger.info(f"{args.subcommand} finished; artifacts in {run_config.output_dir}")
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
