#!/usr/bin/env python3
"""
Tests for configuration validation and loading
"""
import glob
import os

import pytest

from conftest import CONFIG_DIR, SMALL_KIRCHHOFF
from src.exceptions import ConfigValidationError
from src.sim_config import config_from_dict, load_config, validate_config_dict


def test_small_document_is_valid(small_config_dict):
    assert validate_config_dict(small_config_dict) == []


@pytest.mark.parametrize('path', sorted(glob.glob(os.path.join(CONFIG_DIR, '*.json'))))
def test_shipped_configs_load(path):
    config = load_config(path)
    assert config.run.k >= 1
    assert config.name


def test_every_offending_key_is_reported(small_config_dict):
    small_config_dict['geometry']['nx'] = 2
    small_config_dict['physics']['mu'] = -1.0
    small_config_dict['plate']['model'] = 'membrane'
    small_config_dict['run']['T'] = 0
    errors = validate_config_dict(small_config_dict)
    joined = '\n'.join(errors)
    for key in ('geometry.nx', 'physics.mu', 'plate.model', 'run.T'):
        assert key in joined
    assert len(errors) >= 4


def test_unknown_keys_are_rejected(small_config_dict):
    small_config_dict['run']['steps'] = 10
    small_config_dict['extras'] = {}
    errors = validate_config_dict(small_config_dict)
    assert 'run.steps: unknown key' in errors
    assert 'extras: unknown section' in errors


def test_exploratory_run_needs_step_count(small_config_dict):
    small_config_dict['run']['strict'] = False
    assert any('N_user' in e for e in validate_config_dict(small_config_dict))


def test_k_cannot_exceed_plate_nodes(small_config_dict):
    small_config_dict['run']['k'] = 37
    assert any(e.startswith('run.k') for e in validate_config_dict(small_config_dict))


def test_mode_profile_needs_index(small_config_dict):
    small_config_dict['initial']['eta0'] = {'type': 'mode', 'amplitude': 0.1}
    assert any(e.startswith('initial.eta0.index') for e in validate_config_dict(small_config_dict))


@pytest.mark.parametrize('alpha', [0.0, 2.0, 'half'])
def test_alpha_range(small_config_dict, alpha):
    small_config_dict['plate']['alpha'] = alpha
    assert any(e.startswith('plate.alpha') for e in validate_config_dict(small_config_dict))


def test_config_from_dict_raises_with_all_errors(small_config_dict):
    small_config_dict['geometry']['nz'] = 1
    small_config_dict['run']['j_floor'] = 1.5
    with pytest.raises(ConfigValidationError) as info:
        config_from_dict(small_config_dict)
    assert len(info.value.errors) == 2


def test_missing_file(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        load_config(tmp_path / 'absent.json')
    assert 'not found' in info.value.errors[0]


def test_invalid_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"geometry": ', encoding='utf-8')
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert 'invalid JSON' in info.value.errors[0]


def test_name_defaults_to_file_stem(write_config):
    raw = {key: value for key, value in SMALL_KIRCHHOFF.items() if key != 'name'}
    config = load_config(write_config(raw, 'plate_case.json'))
    assert config.name == 'plate_case'


def test_hash_ignores_output_and_debug(small_config_dict):
    base = config_from_dict(small_config_dict).config_hash()
    small_config_dict['output'] = {'dir': '/tmp/elsewhere'}
    small_config_dict['debug'] = {'dump_system': True}
    assert config_from_dict(small_config_dict).config_hash() == base
    small_config_dict['run']['seed'] = 99
    assert config_from_dict(small_config_dict).config_hash() != base


def test_formats_become_tuple(small_config_dict):
    small_config_dict['output'] = {'formats': ['csv', 'npz']}
    assert config_from_dict(small_config_dict).output.formats == ('csv', 'npz')
