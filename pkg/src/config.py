"""
Configuration module for mrwlab
Handles environment settings and the numerical defaults shared by all services
"""
import os
from datetime import time

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


class Config:
    """Base configuration class"""
    APP_NAME = os.environ.get('APP_NAME') or 'mrwlab'
    APP_VERSION = os.environ.get('APP_VERSION') or '1.0.0'
    LOG_LEVEL = os.environ.get('MRWLAB_LOG_LEVEL') or 'INFO'

    # Seeds and parallelism
    DEFAULT_SEED = _env_int('MRWLAB_SEED', None)
    DEFAULT_JOBS = _env_int('MRWLAB_JOBS', os.cpu_count() or 1)

    # Trading session and sampling (OSE-like day giving 229 two-minute samples)
    SESSION_OPEN = time(9, 0, 0)
    SESSION_CLOSE = time(16, 36, 0)
    SAMPLING_STEP_SECONDS = 120
    MAX_START_DELAY_MINUTES = 15

    # Deseasonalization
    PROFILE_SMOOTHING_WIDTH = 0
    MEAN_PASS_MODE = 'subtract'

    # Scaling analysis
    Q_GRID = tuple(round(0.1 + 0.5 * k, 10) for k in range(9))
    SCALES_PER_DECADE = 20
    SCALE_MIN_STEPS = 4
    ACF_MAX_LAG = 200
    PSD_SEGMENTS = 8
    WAVELET_TRUNCATION = 5.0

    # MRW model
    LAMBDA_MAX = 1.0
    CIRCULANT_TOLERANCE = 1e-10

    # Likelihood and optimizer
    NEWTON_TOLERANCE = 1e-9
    NEWTON_MAX_ITERATIONS = 100
    NEWTON_MAX_HALVINGS = 50
    OPTIMIZER_RESTARTS = 3
    OPTIMIZER_XATOL = 1e-4
    OPTIMIZER_FATOL = 1e-3
    OPTIMIZER_MAX_ITERATIONS = 400
    LAMBDA_START = 0.4
    LOG_SIGMA_HALF_WIDTH = 5.0
    MIN_WINDOW_OBSERVATIONS = 100
    MAX_WINDOW_OBSERVATIONS = 6000
    MAX_ZERO_FRACTION = 0.5

    # Monte Carlo test
    ENSEMBLE_MIN_SIZE = 100
    ENSEMBLE_FAILURE_LIMIT = 0.05
    NULL_LAMBDA_GRANULARITY = 0.05
    SYNTHETIC_SAMPLES_PER_DAY = 228
    SYNTHETIC_START_DATE = '2008-01-02'

    TESTING = False


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.environ.get('MRWLAB_LOG_LEVEL') or 'DEBUG'


class ProductionConfig(Config):
    """Production configuration"""
    LOG_LEVEL = os.environ.get('MRWLAB_LOG_LEVEL') or 'INFO'


class TestingConfig(Config):
    """Test configuration - single process, quiet logs"""
    TESTING = True
    LOG_LEVEL = 'WARNING'
    DEFAULT_JOBS = 1


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config(config_name=None):
    """Resolve a configuration class from a name or the MRWLAB_ENV variable"""
    config_name = config_name or os.environ.get('MRWLAB_ENV', 'default')
    return config.get(config_name, config['default'])
