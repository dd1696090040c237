"""Runtime settings - Reads from a .env file and environment variables"""
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


def get_output_dir() -> str:
    """Get default output directory for reports and artifacts"""
    return os.getenv('HFF_OUTPUT_DIR', 'outputs')


def get_default_workers() -> int:
    """Get default number of simultaneous fits"""
    try:
        return max(1, int(os.getenv('HFF_WORKERS', '1')))
    except ValueError:
        return 1


def get_log_level() -> str:
    """Get logging level name"""
    return os.getenv('HFF_LOG_LEVEL', 'INFO').upper()


def get_progress_enabled() -> bool:
    """Whether per-snapshot training progress lines are emitted"""
    return os.getenv('HFF_PROGRESS', '0').strip().lower() in ('1', 'true', 'yes', 'on')


def get_default_profile() -> Optional[str]:
    """Get run profile name (desk or full), if one is set"""
    return os.getenv('HFF_PROFILE') or None
