"""
Shared fixtures: small grids, bases and configuration documents
"""
import copy
import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.ale_kinematics import ReferenceGrid, build_traces  # noqa: E402
from src.plate_spectral_basis import PlateGrid, build_basis  # noqa: E402
from src.sim_config import config_from_dict  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs')


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run desk-scale timing tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale run checked against a wall-clock budget')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


SMALL_KIRCHHOFF = {
    'name': 'small_kirchhoff',
    'geometry': {'Lx': 1.0, 'Ly': 1.0, 'nx': 6, 'ny': 6, 'nz': 4},
    'physics': {'mu': 1.0},
    'plate': {
        'model': 'kirchhoff',
        'params': {'nu': 0.5, 'q': 2.0, 'r': 0.0, 'mu': 0.1, 'f': 'linear', 'f_scale': 0.5},
        'h': {'type': 'quartic_bump', 'amplitude': 0.01},
        'a': 0.5,
        'alpha': 0.5,
    },
    'initial': {
        'eta0': {'type': 'mode', 'index': 1, 'amplitude': 0.001},
        'v0': {'type': 'mode', 'index': 2, 'amplitude': 0.01},
    },
    'run': {'T': 0.01, 'k': 3, 'strict': True, 'seed': 1234},
}


@pytest.fixture(scope='session')
def grid():
    return PlateGrid(Lx=1.0, Ly=1.0, nx=6, ny=6)


@pytest.fixture(scope='session')
def basis(grid):
    return build_basis(grid, 4)


@pytest.fixture(scope='session')
def ref(grid):
    return ReferenceGrid(plate=grid, nz=4)


@pytest.fixture(scope='session')
def traces(basis, ref):
    return build_traces(basis, ref)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def small_config_dict():
    """Mutable copy of a desk-scale Kirchhoff document"""
    return copy.deepcopy(SMALL_KIRCHHOFF)


@pytest.fixture
def small_config(small_config_dict):
    return config_from_dict(small_config_dict)


def make_config(overrides=None, **sections):
    """Small Kirchhoff document with whole sections replaced"""
    raw = copy.deepcopy(SMALL_KIRCHHOFF)
    for key, value in sections.items():
        raw[key] = value
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split('.')
        raw.setdefault(section, {})[key] = value
    return config_from_dict(raw)


@pytest.fixture
def write_config(tmp_path):
    """Write a document to tmp_path and return its path"""
    def _write(raw, name='case.json'):
        path = tmp_path / name
        path.write_text(json.dumps(raw), encoding='utf-8')
        return path
    return _write
