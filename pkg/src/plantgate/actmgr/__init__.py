"""Activity manager: dispatch, workers, periodic scheduler."""

from plantgate.actmgr.manager import ROLE_GATE, ActivityManager
from plantgate.actmgr.scheduler import BadInterval, PeriodicScheduler
from plantgate.actmgr.types import ActivityResult, Principal, ResultReason, Status

__all__ = [
    "ActivityManager",
    "ROLE_GATE",
    "PeriodicScheduler",
    "BadInterval",
    "ActivityResult",
    "Principal",
    "ResultReason",
    "Status",
]
