"""Shared vocabulary used on both sides of the world boundary.

Only plain enums and small value types live here; no policy logic. The
normal-world code may import this module freely without linking any
secure-world behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Role(Enum):
    THIRD_PARTY = "third_party"
    ENGINEER = "engineer"
    ADMINISTRATOR = "administrator"
    SCHEDULER = "scheduler"


class Privilege(Enum):
    """Address-visibility level a caller operates at."""

    NON_CONFIDENTIAL_ONLY = "non_confidential_only"
    FULL = "full"


class RegisterAccess(Enum):
    READ = "read"
    WRITE = "write"


class DenialReason(Enum):
    CONFIDENTIAL_OVERLAP = "ConfidentialOverlap"
    OUT_OF_RANGE = "OutOfRange"
    BAD_KEY = "BadKey"
    ROLE_FORBIDDEN = "RoleForbidden"
    ZERO_LENGTH = "ZeroLength"


@dataclass(frozen=True)
class AccessDecision:
    """Outcome of a secure-world policy check.

    A deny always carries exactly one reason; an allow never does.
    """

    allowed: bool
    reason: Optional[DenialReason] = None

    def __post_init__(self):
        if self.allowed and self.reason is not None:
            raise ValueError("Allow must not carry a denial reason")
        if not self.allowed and self.reason is None:
            raise ValueError("Deny must carry a denial reason")

    @classmethod
    def allow(cls) -> "AccessDecision":
        return cls(True)

    @classmethod
    def deny(cls, reason: DenialReason) -> "AccessDecision":
        return cls(False, reason)

    def to_dict(self) -> dict:
        return {
            "verdict": "allow" if self.allowed else "deny",
            "reason": self.reason.value if self.reason else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AccessDecision":
        if d["verdict"] == "allow":
            return cls.allow()
        return cls.deny(DenialReason(d["reason"]))


def role_privilege(role: Role) -> Privilege:
    """Third parties see only non-confidential addresses; all other roles are full."""
    if role is Role.THIRD_PARTY:
        return Privilege.NON_CONFIDENTIAL_ONLY
    return Privilege.FULL
