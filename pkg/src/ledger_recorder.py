"""
Ledger Recorder Module
Saves ledgers, run summaries and state snapshots of a simulation run to local files
"""
import json
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema
import numpy as np
import pandas as pd

from src.splitting_driver import LEDGER_COLUMNS, EnergyLedger, RunResult, SimState

SCHEMA_DIR = Path(__file__).resolve().parent.parent / 'schemas'
SUMMARY_SCHEMA = SCHEMA_DIR / 'summary.schema.json'


def json_safe(value):
    """Replace non-finite floats and numpy scalars so the document stays valid JSON"""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def validate_summary(summary: Dict, schema_path: Path = SUMMARY_SCHEMA) -> List[str]:
    """Return schema violations of a summary document (empty when valid)"""
    schema = json.loads(Path(schema_path).read_text(encoding='utf-8'))
    validator = jsonschema.Draft7Validator(schema)
    return [f"{'.'.join(str(p) for p in error.path) or 'summary'}: {error.message}"
            for error in sorted(validator.iter_errors(summary), key=lambda e: list(e.path))]


class LedgerRecorder:
    """Writes the artifacts of one run under a run directory"""

    def __init__(self, data_dir: str, run_name: Optional[str] = None):
        """
        Initialize Ledger Recorder

        Args:
            data_dir: Output directory for run artifacts
            run_name: Run identifier, used to name the run sub-directory
        """
        self.run_name = self._sanitize_run_name(run_name or 'run')
        self.run_dir = Path(data_dir) / self.run_name
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.ledger_file = self.run_dir / 'ledger.csv'
        self.summary_file = self.run_dir / 'summary.json'
        self.eta_file = self.run_dir / 'eta_coefficients.csv'
        self.slices_file = self.run_dir / 'velocity_slices.npz'

    def _sanitize_run_name(self, name: str) -> str:
        safe_name = re.sub(r'[^\w\-_]', '_', name)
        safe_name = re.sub(r'_+', '_', safe_name)
        return safe_name.strip('_') or 'run'

    def save_ledger(self, ledger: EnergyLedger) -> Path:
        """ledger.csv with exactly the LedgerRow columns, floats in shortest round-trip form"""
        frame = ledger.to_frame()
        frame.to_csv(self.ledger_file, index=False, float_format=None, encoding='utf-8')
        logging.info(f"Ledger saved: {self.ledger_file} ({len(frame)} rows)")
        return self.ledger_file

    def save_summary(self, summary: Dict) -> Path:
        summary = json_safe(summary)
        errors = validate_summary(summary)
        if errors:
            logging.warning(f"summary.json does not match its schema: {errors}")
        self.summary_file.write_text(json.dumps(summary, indent=2, sort_keys=True), encoding='utf-8')
        logging.info(f"Summary saved: {self.summary_file}")
        return self.summary_file

    def save_eta_snapshots(self, trajectory: List[SimState]) -> Path:
        """One row per step endpoint: step, t, eta_1 ... eta_k"""
        if not trajectory:
            return self.eta_file
        k = len(trajectory[0].plate.eta)
        frame = pd.DataFrame(
            [[state.step, state.t, *state.plate.eta] for state in trajectory],
            columns=['step', 't'] + [f'eta_{i + 1}' for i in range(k)],
        )
        frame.to_csv(self.eta_file, index=False, encoding='utf-8')
        return self.eta_file

    def save_velocity_slices(self, trajectory: List[SimState]) -> Path:
        """Mid-depth horizontal slices of the three velocity components per step"""
        slices = {}
        for state in trajectory:
            u = state.fluid.u
            mid = u.u1.shape[2] // 2
            slices[f'u1_{state.step:05d}'] = u.u1[:, :, mid]
            slices[f'u2_{state.step:05d}'] = u.u2[:, :, mid]
            slices[f'u3_{state.step:05d}'] = u.u3[:, :, mid]
        np.savez_compressed(self.slices_file, **slices)
        return self.slices_file

    def save_run(self, result: RunResult, formats=('csv', 'json')) -> Dict[str, Path]:
        written = {}
        if 'csv' in formats:
            written['ledger'] = self.save_ledger(result.ledger)
            written['eta'] = self.save_eta_snapshots(result.trajectory)
        if 'json' in formats:
            written['summary'] = self.save_summary(result.summary())
        if 'npz' in formats:
            written['slices'] = self.save_velocity_slices(result.trajectory)
        return written

    def save_error_summary(self, message: str, step: Optional[int], seed: int,
                           ledger: Optional[EnergyLedger] = None) -> Path:
        """Summary for an aborted run; the partial ledger is written when available"""
        if ledger is not None:
            self.save_ledger(ledger)
        return self.save_summary({
            'outcome': 'error', 'N': None, 'N_min': None, 'constants': {}, 'max_slacks': {},
            'halt_step': step, 'checks': {'error': message}, 'seed': seed,
        })


def load_ledger(path) -> pd.DataFrame:
    """Read ledger.csv back with exact float round-tripping"""
    frame = pd.read_csv(path, float_precision='round_trip', encoding='utf-8')
    missing = [c for c in LEDGER_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"ledger file {path} lacks columns {missing}")
    return frame
