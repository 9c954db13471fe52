"""
Run configuration for the command-line surface.

Values are resolved in three layers: settings defaults, then a plain-text
`key = value` file, then `--key value` flags. Later layers win.
"""

from dataclasses import dataclass, field, fields
from datetime import time
from pathlib import Path
from typing import Dict, Optional, Tuple

from src.errors import ConfigValidationError
from src.models.estimates import CALENDAR_MONTH, CALENDAR_YEAR, FIXED_COUNT
from src.models.macro import AGGREGATION_RULES
from src.models.scaling import DIFFERENCE, WAVELET

WINDOW_ALIASES = {
    'month': CALENDAR_MONTH,
    'year': CALENDAR_YEAR,
    'count': FIXED_COUNT,
    CALENDAR_MONTH: CALENDAR_MONTH,
    CALENDAR_YEAR: CALENDAR_YEAR,
    FIXED_COUNT: FIXED_COUNT
}

# config-file spellings that differ from the field names
KEY_ALIASES = {
    'lambda': 'lam',
    'windows': 'window_rule',
    'window': 'window_rule',
    'ensemble': 'ensemble_size',
    'output': 'output_dir',
    'out': 'output_dir',
    'q': 'q_grid',
    'T_seconds': 'T',
    'dt_seconds': 'dt'
}

INPUT_FIELDS = (
    'quotes', 'returns', 'estimates', 'distribution', 'curves', 'profile', 'acf',
    'spectrum', 'zeta', 'survival', 'aaa', 'treasury', 'spread', 'lambda_table'
)

REQUIRED_INPUTS = {
    'ingest': ('quotes',),
    'deseason': ('returns',),
    'scaling': ('returns',),
    'simulate': (),
    'fit': ('returns',),
    'mc-test': (),
    'spread': ('aaa', 'treasury'),
    'report': ()
}


def _parse_time(value) -> time:
    if isinstance(value, time):
        return value
    try:
        return time.fromisoformat(str(value))
    except ValueError:
        raise ConfigValidationError(f"invalid time of day '{value}' (expected HH:MM[:SS])")


def _parse_grid(value) -> Tuple[float, ...]:
    if isinstance(value, (tuple, list)):
        return tuple(float(v) for v in value)
    try:
        return tuple(float(v) for v in str(value).split(',') if v.strip())
    except ValueError:
        raise ConfigValidationError(f"invalid q grid '{value}' (expected comma-separated numbers)")


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ('1', 'true', 'yes', 'on')


@dataclass
class RunConfig:
    """Resolved parameters of one subcommand invocation"""
    subcommand: str
    output_dir: Path = Path('out')

    # inputs
    quotes: Optional[Path] = None
    returns: Optional[Path] = None
    estimates: Optional[Path] = None
    distribution: Optional[Path] = None
    curves: Optional[Path] = None
    profile: Optional[Path] = None
    acf: Optional[Path] = None
    spectrum: Optional[Path] = None
    zeta: Optional[Path] = None
    survival: Optional[Path] = None
    aaa: Optional[Path] = None
    treasury: Optional[Path] = None
    spread: Optional[Path] = None
    lambda_table: Optional[Path] = None

    # session and sampling
    session_open: time = time(9, 0, 0)
    session_close: time = time(16, 36, 0)
    step: float = 120.0
    max_start_delay: float = 15.0

    # deseasonalization
    mean_pass: str = 'subtract'
    smoothing: int = 0

    # scaling
    q_grid: Tuple[float, ...] = field(default_factory=tuple)
    method: str = WAVELET
    scale_min: Optional[float] = None
    scale_max: Optional[float] = None
    acf_max_lag: int = 200

    # model and estimation
    lam: Optional[float] = None
    sigma: Optional[float] = None
    T: Optional[float] = None
    dt: Optional[float] = None
    n: Optional[int] = None
    window_rule: str = CALENDAR_MONTH
    window_count: Optional[int] = None
    t_policy: str = 'window'
    samples_per_day: int = 228

    # null ensemble
    ensemble_size: int = 500
    segments: int = 12
    null_lambda: Optional[float] = None
    observed_range: Optional[float] = None

    # macro
    aggregate: str = 'monthly'

    seed: Optional[int] = None
    jobs: int = 1
    keep_log_volatility: bool = True

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_settings(cls, subcommand, settings) -> 'RunConfig':
        return cls(
            subcommand=subcommand,
            session_open=settings.SESSION_OPEN,
            session_close=settings.SESSION_CLOSE,
            step=float(settings.SAMPLING_STEP_SECONDS),
            max_start_delay=float(settings.MAX_START_DELAY_MINUTES),
            mean_pass=settings.MEAN_PASS_MODE,
            smoothing=settings.PROFILE_SMOOTHING_WIDTH,
            q_grid=tuple(settings.Q_GRID),
            acf_max_lag=settings.ACF_MAX_LAG,
            samples_per_day=settings.SYNTHETIC_SAMPLES_PER_DAY,
            seed=settings.DEFAULT_SEED,
            jobs=settings.DEFAULT_JOBS
        )

    def update(self, values: Dict[str, object]) -> 'RunConfig':
        """Apply raw values (strings from a file or typed flag values); unknown keys are errors"""
        known = set(self.field_names()) - {'subcommand'}
        for raw_key, value in values.items():
            key = raw_key.strip().replace('-', '_')
            key = KEY_ALIASES.get(key, key)
            if key not in known:
                raise ConfigValidationError(f"unknown configuration key '{raw_key}'")
            if value is None:
                continue
            setattr(self, key, self._convert(key, value))
        return self

    def _convert(self, key, value):
        try:
            if key in INPUT_FIELDS or key == 'output_dir':
                return Path(value)
            if key in ('session_open', 'session_close'):
                return _parse_time(value)
            if key == 'q_grid':
                return _parse_grid(value)
            if key == 'window_rule':
                if str(value) not in WINDOW_ALIASES:
                    raise ConfigValidationError(f"unknown window rule '{value}'")
                return WINDOW_ALIASES[str(value)]
            if key == 'keep_log_volatility':
                return _parse_bool(value)
            if key in ('smoothing', 'acf_max_lag', 'n', 'window_count', 'samples_per_day',
                       'ensemble_size', 'segments', 'seed', 'jobs'):
                return int(value)
            if key in ('step', 'max_start_delay', 'scale_min', 'scale_max', 'lam', 'sigma', 'T', 'dt',
                       'null_lambda', 'observed_range'):
                return float(value)
        except (TypeError, ValueError) as e:
            raise ConfigValidationError(f"invalid value for '{key}': {value} ({e})")
        return str(value)

    def validate(self, lambda_max: float = 1.0) -> 'RunConfig':
        for name in REQUIRED_INPUTS.get(self.subcommand, ()):
            if getattr(self, name) is None:
                raise ConfigValidationError(f"{self.subcommand} needs --{name.replace('_', '-')}")
        for name in INPUT_FIELDS:
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigValidationError(f"input file not found: {path}")

        if self.session_close <= self.session_open:
            raise ConfigValidationError("session close must be after session open")
        if self.step <= 0:
            raise ConfigValidationError("sampling step must be positive")
        if self.max_start_delay < 0:
            raise ConfigValidationError("maximum start delay must be non-negative")
        if not self.q_grid or any(q <= 0 for q in self.q_grid):
            raise ConfigValidationError("q grid must hold positive values")
        if self.method not in (WAVELET, DIFFERENCE):
            raise ConfigValidationError(f"unknown scaling method '{self.method}'")
        if self.scale_min is not None and self.scale_max is not None and self.scale_min >= self.scale_max:
            raise ConfigValidationError("scale_min must be below scale_max")
        for name in ('lam', 'null_lambda'):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= lambda_max:
                raise ConfigValidationError(f"{name} must lie in [0, {lambda_max}]")
        if self.sigma is not None and self.sigma <= 0:
            raise ConfigValidationError("sigma must be positive")
        if self.n is not None and self.n < 1:
            raise ConfigValidationError("n must be at least 1")
        if self.window_rule == FIXED_COUNT and not self.window_count:
            raise ConfigValidationError("fixed-count windows need --window-count")
        if self.t_policy not in ('window', 'fit', 'fixed'):
            raise ConfigValidationError(f"unknown T policy '{self.t_policy}'")
        if self.t_policy == 'fixed' and self.T is None:
            raise ConfigValidationError("T policy 'fixed' needs --T")
        if self.ensemble_size < 1 or self.segments < 1:
            raise ConfigValidationError("ensemble size and segment count must be positive")
        if self.aggregate not in AGGREGATION_RULES:
            raise ConfigValidationError(f"unknown aggregation rule '{self.aggregate}'")
        if self.jobs < 1:
            raise ConfigValidationError("jobs must be at least 1")
        return self

    def to_dict(self):
        values = {}
        for name in self.field_names():
            value = getattr(self, name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, time):
                value = value.isoformat()
            elif isinstance(value, tuple):
                value = list(value)
            values[name] = value
        # wall-time and location settings stay out of the manifest
        values.pop('jobs', None)
        values.pop('output_dir', None)
        return values
