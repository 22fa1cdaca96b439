"""
Utility functions for the splitting simulator
"""
import glob
import logging
import os
from datetime import date, datetime, timedelta

from src.config import LOG_DIR, LOG_FORMAT, LOG_LEVEL


def setup_logging(run_name, log_dir=LOG_DIR, level=LOG_LEVEL):
    """Setup logging configuration"""
    # Create Log directory if it doesn't exist
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)
        print(f"Created Log directory: {log_dir}")

    log_filename = os.path.join(log_dir, f'{run_name}_{date.today()}_simulation_log.log')

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_filename),
            logging.StreamHandler()
        ],
        force=True,
    )
    return log_filename


def get_log_directory():
    """Get the log directory path"""
    return LOG_DIR


def cleanup_old_logs(days_to_keep=30, log_dir=None):
    """Clean up log files older than specified days; returns the number removed"""
    log_dir = log_dir or get_log_directory()
    if not os.path.exists(log_dir):
        return 0

    cutoff_date = datetime.now() - timedelta(days=days_to_keep)
    log_files = glob.glob(os.path.join(log_dir, "*.log"))

    deleted_count = 0
    for log_file in log_files:
        try:
            file_time = datetime.fromtimestamp(os.path.getmtime(log_file))
            if file_time < cutoff_date:
                os.remove(log_file)
                deleted_count += 1
                logging.info(f"Deleted old log file: {log_file}")
        except OSError as e:
            logging.warning(f"Error deleting log file {log_file}: {e}")

    if deleted_count > 0:
        logging.info(f"Cleaned up {deleted_count} old log files")
    return deleted_count
