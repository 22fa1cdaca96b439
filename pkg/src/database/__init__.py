# Database package
from .models import DatabaseManager, LedgerEntryRecord, SimulationRun
from .repository import LedgerEntryRepository, RunRepository, previous_runs, record_run

__all__ = ['DatabaseManager', 'SimulationRun', 'LedgerEntryRecord', 'RunRepository', 'LedgerEntryRepository',
           'previous_runs', 'record_run']
