import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
os.environ.setdefault('MRWLAB_ENV', 'testing')
os.environ.pop('MRWLAB_SEED', None)

from src.config import TestingConfig  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the long Monte Carlo acceptance checks')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running Monte Carlo check (needs --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def settings():
    return TestingConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20080102)


@pytest.fixture
def quotes_file(tmp_path):
    """Write `timestamp,bid,ask` rows and return the path"""
    def write(rows, name='quotes.csv', header='timestamp,bid,ask'):
        path = tmp_path / name
        path.write_text(header + '\n' + '\n'.join(','.join(str(v) for v in row) for row in rows) + '\n')
        return path
    return write
