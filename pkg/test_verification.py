"""
Tests for the verification suites and the refinement study
"""
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import CONFIG_DIR, make_config
from src.convergence import CONVERGENCE_COLUMNS, converge
from src.exceptions import ParameterError
from src.sim_config import load_config
from src.verification import (
    basis_suite, coercivity_suite, fsp_suite, geometry_suite, model_suite, ssp_suite, verify,
)


@pytest.fixture(scope='module')
def config():
    return make_config({'run.N_user': 2})


@pytest.mark.parametrize('suite', [basis_suite, geometry_suite, model_suite, coercivity_suite, ssp_suite, fsp_suite])
def test_suite_passes_on_small_problem(config, suite):
    result = suite(config)
    assert result.passed, result.details


def test_geometry_suite_holds_to_rounding_on_both_grids(config):
    result = geometry_suite(config)
    assert set(result.details) == {'coarse', 'fine'}
    assert max(result.details.values()) <= 1e-12


def test_fsp_suite_catches_corrupted_convection(config):
    corrupted = replace(config, debug=replace(config.debug, corrupt_convection_sign=True))
    result = fsp_suite(corrupted)
    assert not result.passed
    assert result.details['skew'] > 1e-12


def test_verify_reports_every_suite(config):
    report = verify(config)
    assert report.passed, report.to_dict()
    names = [suite.name for suite in report.suites]
    assert names == ['basis', 'geometric_identity', 'gradient_consistency', 'coercivity', 'ssp_closed_form',
                     'fsp_skew_zero', 'strict_run']
    assert all(suite.seconds >= 0.0 for suite in report.suites)


def test_converge_needs_three_levels(config):
    with pytest.raises(ParameterError):
        converge(config, levels=2)


def test_converge_on_zero_problem(tmp_path):
    report = converge(load_config(os.path.join(CONFIG_DIR, 'zero.json')), levels=3, out_dir=tmp_path)
    assert report.passed
    assert tuple(report.table.columns) == CONVERGENCE_COLUMNS
    assert (report.table['eta_diff'] == 0.0).all()
    assert (report.table['u_diff'] == 0.0).all()
    assert report.csv_path == tmp_path / 'convergence.csv'
    assert report.csv_path.exists()


def test_converge_levels_double_the_step_count(config):
    report = converge(config, levels=3, workers=2)
    Ns = report.table['N'].tolist()
    assert Ns == [report.N_min, 2 * report.N_min, 4 * report.N_min]
    assert (report.table['outcome'] == 'completed').all()
    assert report.table['eta_diff'].iloc[-1] == 0.0
    assert np.isnan(report.table['mismatch_ratio'].iloc[0])


def test_converge_differences_decrease():
    config = make_config({'run.T': 0.02})
    report = converge(config, levels=3)
    assert report.passed, report.table.to_string()
    assert report.table['eta_diff'].iloc[0] >= report.table['eta_diff'].iloc[1]


@pytest.mark.slow
def test_desk_convergence_study_fits_the_time_budget(tmp_path):
    start = time.perf_counter()
    for name in ('kirchhoff', 'berger'):
        report = converge(load_config(os.path.join(CONFIG_DIR, f'{name}.json')), levels=3, out_dir=tmp_path / name)
        assert (report.table['outcome'] == 'completed').all()
    assert time.perf_counter() - start < 600.0
