"""Principals and activity results."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from plantgate.common import Role


@dataclass(frozen=True)
class Principal:
    """An authenticated caller; the role is fixed at authentication time."""

    user_id: str
    role: Role


class Status(Enum):
    OK = "ok"
    DENIED = "denied"
    FAILED = "failed"


class ResultReason(Enum):
    ROLE_FORBIDDEN = "RoleForbidden"
    CONFIDENTIAL_OVERLAP = "ConfidentialOverlap"
    OUT_OF_RANGE = "OutOfRange"
    BAD_KEY = "BadKey"
    ZERO_LENGTH = "ZeroLength"
    UNKNOWN_ASSET = "UnknownAsset"
    NETWORK_ERROR = "NetworkError"
    TRANSFER_ERROR = "TransferError"
    PROOF_INVALID = "ProofInvalid"
    STORAGE_ERROR = "StorageError"


@dataclass
class ActivityResult:
    """Outcome of one dispatched command.

    Ok carries a payload matching the command kind; Denied and Failed carry a
    reason. ``audit_ids`` are the normal-world chronicle sequence numbers
    emitted while serving the request.
    """

    status: Status
    payload: dict = field(default_factory=dict)
    reason: Optional[ResultReason] = None
    detail: str = ""
    audit_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.status is Status.OK and self.reason is not None:
            raise ValueError("Ok result must not carry a reason")
        if self.status is not Status.OK and self.reason is None:
            raise ValueError(f"{self.status.value} result must carry a reason")

    @property
    def ok(self) -> bool:
        return self.status is Status.OK
