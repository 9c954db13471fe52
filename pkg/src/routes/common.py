"""
Shared plumbing for the subcommand modules
"""

import argparse
from importlib.metadata import PackageNotFoundError, version

import matplotlib
import numpy as np
import pandas as pd
import scipy

from src.errors import ConfigValidationError
from src.models.run_config import RunConfig
from src.services.artifact_service import read_key_values


def add_common_arguments(parser: argparse.ArgumentParser):
    """Options every subcommand accepts; defaults stay None so file values can show through"""
    parser.add_argument('--config', help='key = value run configuration file')
    parser.add_argument('--output', dest='output_dir', help='artifact directory')
    parser.add_argument('--seed', type=int, help='root seed (falls back to MRWLAB_SEED)')
    parser.add_argument('--jobs', type=int, help='worker processes; affects wall time only')


def add_session_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--session-open', help='HH:MM[:SS]')
    parser.add_argument('--session-close', help='HH:MM[:SS]')
    parser.add_argument('--step', type=float, help='sampling step in seconds')


def resolve_run_config(args: argparse.Namespace, settings) -> RunConfig:
    """Settings defaults, then the --config file, then explicit flags"""
    run_config = RunConfig.from_settings(args.subcommand, settings)
    if getattr(args, 'config', None):
        run_config.update(read_key_values(args.config))
    known = set(RunConfig.field_names()) - {'subcommand'}
    flags = {key: value for key, value in vars(args).items() if key in known}
    run_config.update(flags)
    return run_config.validate(settings.LAMBDA_MAX)


def require_seed(run_config: RunConfig) -> int:
    if run_config.seed is None:
        raise ConfigValidationError(f"{run_config.subcommand} needs --seed or MRWLAB_SEED")
    return run_config.seed


def package_versions(settings) -> dict:
    versions = {
        settings.APP_NAME: settings.APP_VERSION,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'matplotlib': matplotlib.__version__
    }
    try:
        versions['openpyxl'] = version('openpyxl')
    except PackageNotFoundError:
        pass
    return versions
