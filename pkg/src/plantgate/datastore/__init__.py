"""Local storage: encrypted record store, append-only chronicle logs, profile store."""

from plantgate.datastore.auditlog import AuditLog, AuditRecord, Outcome, World
from plantgate.datastore.records import (
    Category,
    DecryptFailure,
    NoStorageKey,
    RecordAccessDenied,
    RecordStore,
    StoredRecord,
)
from plantgate.datastore.profiles import ProfileStore

__all__ = [
    "AuditLog",
    "AuditRecord",
    "Outcome",
    "World",
    "Category",
    "DecryptFailure",
    "NoStorageKey",
    "RecordAccessDenied",
    "RecordStore",
    "StoredRecord",
    "ProfileStore",
]
