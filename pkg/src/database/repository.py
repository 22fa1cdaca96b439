"""
Database Repository for CRUD operations on fsi_ prefixed tables
"""

from sqlalchemy.orm import Session
from sqlalchemy import desc
from datetime import datetime
from typing import Dict, List, Optional
from .models import SimulationRun, LedgerEntryRecord
import logging

logger = logging.getLogger("database")

LEDGER_FIELDS = (
    'n', 't', 'S', 'F', 'D', 'mismatch_ssp', 'mismatch_fsp', 'J_min', 'J_max', 'energy_kinetic_fluid',
    'energy_elastic', 'energy_plate_kinetic', 'potential', 'fsp_slack',
)


class RunRepository:
    """Repository for SimulationRun operations"""

    def __init__(self, db_manager):
        self.db_manager = db_manager

    def create(self, session: Session, run_data: dict) -> SimulationRun:
        """Register a run before it starts stepping"""
        run = SimulationRun(**run_data)
        session.add(run)
        session.commit()
        session.refresh(run)
        return run

    def finish(self, session: Session, run_id: int, outcome: str, N: Optional[int] = None,
               N_min: Optional[int] = None, halt_step: Optional[int] = None,
               min_fsp_slack: Optional[float] = None, max_ssp_residual: Optional[float] = None):
        """Record the outcome of a run"""
        run = session.query(SimulationRun).filter(SimulationRun.id == run_id).first()
        if run:
            run.outcome = outcome
            run.N = N
            run.N_min = N_min
            run.halt_step = halt_step
            run.min_fsp_slack = min_fsp_slack
            run.max_ssp_residual = max_ssp_residual
            run.finished_at = datetime.utcnow()
            session.commit()
        return run

    def get_recent(self, session: Session, limit: int = 20, config_hash: Optional[str] = None) -> List[SimulationRun]:
        """Most recent runs, optionally for one configuration"""
        query = session.query(SimulationRun)
        if config_hash:
            query = query.filter(SimulationRun.config_hash == config_hash)
        return query.order_by(desc(SimulationRun.started_at), desc(SimulationRun.id)).limit(limit).all()


class LedgerEntryRepository:
    """Repository for LedgerEntryRecord operations"""

    def __init__(self, db_manager):
        self.db_manager = db_manager

    def bulk_add(self, session: Session, run_id: int, rows: List[Dict]) -> int:
        """Insert ledger rows for a run; returns the number stored"""
        records = [LedgerEntryRecord(run_id=run_id, **{key: row[key] for key in LEDGER_FIELDS}) for row in rows]
        session.add_all(records)
        session.commit()
        return len(records)

    def get_for_run(self, session: Session, run_id: int) -> List[LedgerEntryRecord]:
        return session.query(LedgerEntryRecord).filter(
            LedgerEntryRecord.run_id == run_id
        ).order_by(LedgerEntryRecord.n).all()


def record_run(db_manager, result) -> int:
    """Store a finished RunResult with its ledger; returns the run id"""
    config = result.config
    summary = result.summary()
    session = db_manager.get_session()
    try:
        runs = RunRepository(db_manager)
        run = runs.create(session, {
            'name': config.name, 'config_hash': config.config_hash(), 'model': config.plate.model,
            'k': config.run.k, 'strict': config.run.strict, 'seed': config.run.seed,
        })
        LedgerEntryRepository(db_manager).bulk_add(session, run.id, result.ledger.rows())
        runs.finish(session, run.id, result.outcome, N=result.plan.N, N_min=result.plan.N_min,
                    halt_step=result.halt_step, min_fsp_slack=summary['max_slacks']['min_fsp_slack'],
                    max_ssp_residual=summary['max_slacks']['max_ssp_residual'])
        logger.info(f"Run {config.name} recorded in registry as id={run.id}")
        return run.id
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def previous_runs(db_manager, config_hash: str, limit: int = 5) -> List[Dict]:
    """Earlier registry entries of one configuration, newest first"""
    session = db_manager.get_session()
    try:
        recent = RunRepository(db_manager).get_recent(session, limit=limit, config_hash=config_hash)
        return [{'id': r.id, 'outcome': r.outcome, 'N': r.N, 'started_at': r.started_at} for r in recent]
    finally:
        session.close()
