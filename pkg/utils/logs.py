"""Logging setup shared by the CLI and the worker processes"""
import logging
import sys
from typing import Optional

import config.settings as settings
from config import constants

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_configured = False


class _ProgressFilter(logging.Filter):
    """Pass only training progress records (keep=True) or only the rest (keep=False)"""

    def __init__(self, keep: bool):
        super().__init__()
        self.keep = keep

    def filter(self, record: logging.LogRecord) -> bool:
        return record.name.startswith(constants.PROGRESS_LOGGER) == self.keep


def setup_logging(level: Optional[str] = None) -> None:
    """Attach the stderr handlers to the root logger (idempotent)

    Progress lines are written bare, everything else with a timestamped prefix.
    """
    global _configured
    level_name = (level or settings.get_log_level()).upper()
    root = logging.getLogger()
    root.setLevel(getattr(logging, level_name, logging.INFO))
    if _configured:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT))
    handler.addFilter(_ProgressFilter(keep=False))
    root.addHandler(handler)

    progress = logging.StreamHandler(sys.stderr)
    progress.setFormatter(logging.Formatter("%(message)s"))
    progress.addFilter(_ProgressFilter(keep=True))
    root.addHandler(progress)
    _configured = True
