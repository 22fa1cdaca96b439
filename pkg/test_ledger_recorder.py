"""
Tests for run artifacts: ledger CSV, summary JSON and snapshots
"""
import json
import math

import numpy as np
import pandas as pd
import pytest

from conftest import make_config
from src.ledger_recorder import LedgerRecorder, json_safe, load_ledger, validate_summary
from src.splitting_driver import LEDGER_COLUMNS, EnergyLedger, LedgerEntry, run


@pytest.fixture(scope='module')
def short_run():
    return run(make_config({'run.N_user': 2}), sample_assumptions=False)


def _ledger():
    values = [0.1, 1.0 / 3.0, 2.0 ** -40, 123456.789012345678, math.pi]
    entries = []
    for n, value in enumerate(values):
        entries.append(LedgerEntry(
            n=n, t=value, S=value, F=value * 0.5, D=value * 1e-3, mismatch_ssp=value, mismatch_fsp=value,
            J_min=1.0 - value * 1e-3, J_max=1.0 + value * 1e-3, energy_kinetic_fluid=value, energy_elastic=value,
            energy_plate_kinetic=value, potential=-value, fsp_slack=value * 1e-9,
        ))
    return EnergyLedger(F0=1.0, entries=entries)


def test_ledger_csv_header_and_exact_floats(tmp_path):
    ledger = _ledger()
    recorder = LedgerRecorder(str(tmp_path), 'exact')
    path = recorder.save_ledger(ledger)
    with open(path, encoding='utf-8') as handle:
        assert handle.readline().strip() == ','.join(LEDGER_COLUMNS)
    frame = load_ledger(path)
    expected = ledger.to_frame()
    for column in LEDGER_COLUMNS:
        assert frame[column].tolist() == expected[column].tolist()


def test_load_ledger_rejects_missing_columns(tmp_path):
    path = tmp_path / 'partial.csv'
    pd.DataFrame({'n': [0], 't': [0.1]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        load_ledger(path)


def test_run_name_is_sanitized(tmp_path):
    recorder = LedgerRecorder(str(tmp_path), 'plate case/../1')
    assert recorder.run_dir.parent == tmp_path
    assert '/' not in recorder.run_name


def test_json_safe_replaces_non_finite():
    cleaned = json_safe({'a': float('nan'), 'b': [np.float64(1.5), float('inf')], 'c': np.int64(3)})
    assert cleaned == {'a': None, 'b': [1.5, None], 'c': 3}
    json.dumps(cleaned, allow_nan=False)


def test_schema_rejects_unknown_outcome(short_run):
    summary = json_safe(short_run.summary())
    summary['outcome'] = 'exploded'
    assert any(e.startswith('outcome') for e in validate_summary(summary))


def test_save_run_writes_requested_formats(tmp_path, short_run):
    recorder = LedgerRecorder(str(tmp_path), short_run.config.name)
    written = recorder.save_run(short_run, formats=('csv', 'json', 'npz'))
    assert set(written) == {'ledger', 'eta', 'summary', 'slices'}
    summary = json.loads(written['summary'].read_text(encoding='utf-8'))
    assert summary['outcome'] == 'completed'
    assert summary['N'] == short_run.plan.N
    eta = pd.read_csv(written['eta'])
    assert len(eta) == short_run.plan.N + 1
    assert list(eta.columns[:2]) == ['step', 't']
    slices = np.load(written['slices'])
    assert 'u3_00000' in slices.files


def test_error_summary_keeps_partial_ledger(tmp_path):
    recorder = LedgerRecorder(str(tmp_path), 'aborted')
    path = recorder.save_error_summary('Step 3: solve failed', 3, 1234, _ledger())
    summary = json.loads(path.read_text(encoding='utf-8'))
    assert summary['outcome'] == 'error'
    assert summary['halt_step'] == 3
    assert validate_summary(summary) == []
    assert recorder.ledger_file.exists()
