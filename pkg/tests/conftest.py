"""
Shared fixtures and the --runslow switch
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the repository root to the path for package imports
repo_root = Path(__file__).parent.parent
if str(repo_root) not in sys.path:
    sys.path.insert(0, str(repo_root))

from forest.controls import ForestControls  # noqa: E402
from input_parsers.models import Dataset  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the desk-scale reproduction tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale reproduction, runs only with --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def regression_data() -> Dataset:
    rng = np.random.default_rng(2024)
    X = rng.uniform(0.0, 1.0, size=(150, 4))
    y = 4.0 * X[:, 0] + np.sin(3.0 * X[:, 1]) + rng.normal(0.0, 0.3, size=150)
    return Dataset(features=X, response=y)


@pytest.fixture
def fast_controls() -> ForestControls:
    return ForestControls(n_trees=20, nodesize=5, seed=11)
