"""
Run configuration

Precedence: built-in defaults < lorf_config.env (or --config) < process
environment (LORF_*) < command-line flags.
"""
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional

from dotenv import load_dotenv

from density_ratio.classifier_ratio import ClassifierRatioConfig
from forest.controls import ForestControls
from input_parsers.errors import ConfigurationError

ENV_PREFIX = 'LORF_'
DEFAULT_CONFIG_FILE = Path('lorf_config.env')
RATIO_METHODS = ('ulsif', 'classifier')


@dataclass
class RunConfig:
    """Fully resolved settings of one CLI run; written into its manifest"""
    command: str = ''
    seed: int = 0
    threads: int = -1
    n_trees: int = 500
    mtry: Optional[int] = None
    nodesize: int = 5
    max_terminal_nodes: Optional[int] = None
    sample_fraction: float = 0.6
    with_replacement: bool = False
    n0_fraction: float = 0.75
    ratio_method: str = 'ulsif'
    bandwidth_grid: Optional[List[float]] = None
    ridge_grid: Optional[List[float]] = None
    max_centroids: int = 100
    classifier_nodesize: int = 10
    quantiles: List[float] = field(default_factory=lambda: [0.1, 0.5, 0.9])
    alpha_level: float = 0.1
    response_column: str = 'y'
    log_level: str = 'WARNING'
    timezone: str = 'UTC'
    paths: Dict[str, Optional[str]] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.ratio_method not in RATIO_METHODS:
            raise ConfigurationError(f"ratio method must be one of {RATIO_METHODS}, got '{self.ratio_method}'")
        if not 0.0 < self.n0_fraction < 1.0:
            raise ConfigurationError(f"n0_fraction must be in (0, 1), got {self.n0_fraction}")
        if self.threads == 0:
            raise ConfigurationError("threads must be nonzero (-1 uses every core)")

    def forest_controls(self) -> ForestControls:
        return ForestControls(
            n_trees=self.n_trees,
            mtry=self.mtry,
            nodesize=self.nodesize,
            max_terminal_nodes=self.max_terminal_nodes,
            sample_fraction=self.sample_fraction,
            with_replacement=self.with_replacement,
            seed=self.seed,
        )

    def classifier_ratio_config(self) -> ClassifierRatioConfig:
        """Probability-forest settings for the classifier ratio; shares the forest flags"""
        return ClassifierRatioConfig(
            n_trees=self.n_trees,
            mtry=self.mtry,
            nodesize=self.classifier_nodesize,
            sample_fraction=self.sample_fraction,
            with_replacement=self.with_replacement,
        )

    def with_overrides(self, **values) -> "RunConfig":
        """Copy with every non-None value applied"""
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


def parse_float_list(text: str) -> List[float]:
    """'0.1,0.5,0.9' -> [0.1, 0.5, 0.9]"""
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"expected comma-separated numbers, got '{text}'") from e


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"expected comma-separated integers, got '{text}'") from e


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(text)


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ('', 'none') else int(text)


# env suffix -> (RunConfig field, parser)
_ENV_FIELDS: Dict[str, tuple] = {
    'SEED': ('seed', int),
    'THREADS': ('threads', int),
    'TREES': ('n_trees', int),
    'MTRY': ('mtry', _optional_int),
    'NODESIZE': ('nodesize', int),
    'MAX_NODES': ('max_terminal_nodes', _optional_int),
    'SAMPLE_FRACTION': ('sample_fraction', float),
    'REPLACE': ('with_replacement', _parse_bool),
    'N0_FRACTION': ('n0_fraction', float),
    'RATIO_METHOD': ('ratio_method', str),
    'CLASSIFIER_NODESIZE': ('classifier_nodesize', int),
    'QUANTILES': ('quantiles', parse_float_list),
    'RESPONSE_COLUMN': ('response_column', str),
    'LOG_LEVEL': ('log_level', str.upper),
    'TIMEZONE': ('timezone', str),
}


def load_config_file(config_path: Optional[Path] = None) -> Optional[Path]:
    """
    Load a dotenv file into the environment without overriding set variables

    Args:
        config_path: Explicit file (must exist); None tries lorf_config.env

    Returns:
        The loaded path, or None when no file was found
    """
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")
        load_dotenv(config_path, override=False)
        return config_path
    if DEFAULT_CONFIG_FILE.exists():
        load_dotenv(DEFAULT_CONFIG_FILE, override=False)
        return DEFAULT_CONFIG_FILE
    return None


def config_from_env(environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Defaults overlaid with LORF_* environment variables"""
    environ = os.environ if environ is None else environ
    values = {}
    for suffix, (name, parse) in _ENV_FIELDS.items():
        raw = environ.get(ENV_PREFIX + suffix)
        if raw is None:
            continue
        try:
            values[name] = parse(raw)
        except ValueError as e:
            raise ConfigurationError(f"invalid value for {ENV_PREFIX}{suffix}: '{raw}'") from e
    return RunConfig(**values)
