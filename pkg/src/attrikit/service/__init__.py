"""Networked annotation backend: sessions, tasks, journal, exports."""

from .grouping import GroupParams, propose_groups
from .journal import Journal, JournalCorruptionError, JournalEvent
from .state import DatasetService, ServiceError, SessionError

__all__ = [
    "DatasetService",
    "GroupParams",
    "Journal",
    "JournalCorruptionError",
    "JournalEvent",
    "ServiceError",
    "SessionError",
    "propose_groups",
]
