"""
Run manifests: the resolved config, seed, package versions and timing of a
CLI run, written next to its primary output as <output>.manifest.json
"""
import json
import logging
import platform
import time
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Union

import joblib
import numpy as np
import pandas as pd
import pytz
import scipy

from . import __version__
from .config import RunConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def package_versions() -> dict:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'joblib': joblib.__version__,
        'local_forest': __version__,
    }


def manifest_path(primary_output: Union[str, Path]) -> Path:
    primary_output = Path(primary_output)
    return primary_output.with_name(primary_output.name + '.manifest.json')


class RunManifest:
    """Collects run metadata; use as a context manager around the run"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.outputs: List[str] = []
        self.started_at: Optional[str] = None
        self.wall_time_seconds: Optional[float] = None
        self._t0: Optional[float] = None

    def __enter__(self):
        try:
            zone = pytz.timezone(self.config.timezone)
        except pytz.UnknownTimeZoneError:
            logger.warning("Unknown timezone '%s'; using UTC", self.config.timezone)
            zone = pytz.UTC
        self.started_at = datetime.now(zone).isoformat()
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.wall_time_seconds = time.perf_counter() - self._t0

    def add_output(self, path: Union[str, Path]) -> None:
        self.outputs.append(str(path))

    def to_dict(self) -> dict:
        return {
            'schema_version': SCHEMA_VERSION,
            'command': self.config.command,
            'config': self.config.to_dict(),
            'seed': self.config.seed,
            'versions': package_versions(),
            'started_at': self.started_at,
            'wall_time_seconds': self.wall_time_seconds,
            'outputs': list(self.outputs),
        }

    def write(self, primary_output: Union[str, Path]) -> Path:
        path = manifest_path(primary_output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return path
