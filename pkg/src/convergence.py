"""
Time-step refinement study behind `main.py converge`

Levels use N = N_min * 2^l with the Galerkin span held fixed; every level is
compared against the finest one.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from src.exceptions import ParameterError
from src.plate_spectral_basis import GalerkinBasis
from src.sim_config import SimConfig
from src.splitting_driver import RunResult, build_plan, build_problem, initial_data, run

logger = logging.getLogger(__name__)

MIN_LEVELS = 3
MONOTONE_TOL = 1e-14
MISMATCH_RATIO_REFERENCE = 2.0 ** 0.4

CONVERGENCE_COLUMNS = (
    'level', 'N', 'dt', 'outcome', 'eta_diff', 'u_diff', 'max_mismatch_ssp_sq', 'mismatch_ratio',
    'monotone_eta', 'monotone_u', 'passed',
)


@dataclass
class ConvergenceReport:
    table: pd.DataFrame
    N_min: int
    passed: bool
    mismatch_trend: bool
    csv_path: Optional[Path] = None


def _level_config(config: SimConfig, N: int) -> SimConfig:
    return replace(config, run=replace(config.run, N_user=N, strict=True))


def _run_level(config: SimConfig, basis: GalerkinBasis, N: int) -> RunResult:
    logger.info(f"Convergence level with N={N}")
    return run(_level_config(config, N), basis=basis, sample_assumptions=False)


def eta_difference(coarse: RunResult, fine: RunResult) -> float:
    """max over the coarse endpoints of the coefficient (= grid L2) distance"""
    ratio = fine.plan.N // coarse.plan.N
    worst = 0.0
    for state in coarse.trajectory:
        partner = fine.trajectory[state.step * ratio]
        worst = max(worst, float(np.linalg.norm(state.plate.eta - partner.plate.eta)))
    return worst


def velocity_difference(coarse: RunResult, fine: RunResult, face_volumes: np.ndarray) -> float:
    """L2(0,T; L2) distance of the piecewise-constant-in-time velocities, integrated over fine intervals"""
    ratio = fine.plan.N // coarse.plan.N
    dt_fine = fine.plan.dt
    total = 0.0
    for m in range(fine.plan.N):
        diff = fine.trajectory[m + 1].fluid.u.flat() - coarse.trajectory[m // ratio + 1].fluid.u.flat()
        total += dt_fine * float(diff @ (face_volumes * diff))
    return float(np.sqrt(total))


def _is_monotone(values: List[float]) -> bool:
    return all(b <= a + MONOTONE_TOL * max(abs(a), 1.0) for a, b in zip(values, values[1:]))


def converge(config: SimConfig, levels: int = MIN_LEVELS, out_dir: Optional[Path] = None,
             workers: int = 1) -> ConvergenceReport:
    """
    Run the refinement study

    Args:
        config: validated SimConfig; run.N_user and run.strict are overridden per level
        levels: number of levels, at least three
        out_dir: directory for convergence.csv (nothing written when omitted)
        workers: levels run concurrently when greater than one

    Returns:
        ConvergenceReport with one table row per level
    """
    if levels < MIN_LEVELS:
        raise ParameterError(f"converge needs at least {MIN_LEVELS} levels, got {levels}")

    problem = build_problem(config)
    plan, _ = build_plan(config, problem, initial_data(config, problem), sample_assumptions=False)
    N_min = plan.N_min
    Ns = [N_min * 2 ** level for level in range(levels)]
    logger.info(f"Convergence study: N_min={N_min}, levels N={Ns}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda N: _run_level(config, problem.basis, N), Ns))
    else:
        results = [_run_level(config, problem.basis, N) for N in Ns]

    finest = results[-1]
    complete = all(r.outcome == 'completed' for r in results)
    face_volumes = problem.ref.face_volumes()
    eta_diffs, u_diffs, mismatch = [], [], []
    for result in results:
        if complete:
            eta_diffs.append(eta_difference(result, finest))
            u_diffs.append(velocity_difference(result, finest, face_volumes))
        else:
            eta_diffs.append(np.nan)
            u_diffs.append(np.nan)
        active = [e for e in result.ledger.entries if not e.terminal]
        mismatch.append(max((e.mismatch_ssp ** 2 for e in active), default=0.0))

    # the finest level compares with itself
    monotone_eta = complete and _is_monotone(eta_diffs[:-1])
    monotone_u = complete and _is_monotone(u_diffs[:-1])
    ratios = [np.nan] + [a / b if b > 0 else np.nan for a, b in zip(mismatch, mismatch[1:])]
    finite_ratios = [r for r in ratios if np.isfinite(r)]
    mismatch_trend = all(r >= MISMATCH_RATIO_REFERENCE for r in finite_ratios)

    rows = []
    for level, (result, eta_d, u_d, mm, ratio) in enumerate(zip(results, eta_diffs, u_diffs, mismatch, ratios)):
        rows.append({
            'level': level, 'N': result.plan.N, 'dt': result.plan.dt, 'outcome': result.outcome,
            'eta_diff': eta_d, 'u_diff': u_d, 'max_mismatch_ssp_sq': mm, 'mismatch_ratio': ratio,
            'monotone_eta': monotone_eta, 'monotone_u': monotone_u,
            'passed': bool(result.outcome == 'completed' and monotone_eta and monotone_u),
        })
    table = pd.DataFrame(rows, columns=list(CONVERGENCE_COLUMNS))
    passed = bool(monotone_eta and monotone_u)
    if not passed:
        logger.warning(f"Convergence differences are not monotone: eta={eta_diffs} u={u_diffs}")
    if not mismatch_trend:
        logger.info(f"Mismatch ratios {finite_ratios} fall below {MISMATCH_RATIO_REFERENCE:.3f}")

    csv_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / 'convergence.csv'
        table.to_csv(csv_path, index=False, encoding='utf-8')
        logger.info(f"Convergence table saved: {csv_path}")
    return ConvergenceReport(table=table, N_min=N_min, passed=passed, mismatch_trend=mismatch_trend,
                             csv_path=csv_path)
