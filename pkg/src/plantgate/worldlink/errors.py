"""Errors crossing or concerning the world boundary."""

from __future__ import annotations

from typing import Optional


class WorldLinkError(Exception):
    """Base class; ``wire_name`` is the code carried in channel error replies."""

    wire_name = "WorldLinkError"


class EndpointUnreachable(WorldLinkError):
    wire_name = "EndpointUnreachable"


class ChannelError(WorldLinkError):
    """Transport failure or malformed frame on the world channel."""

    wire_name = "ChannelError"


class ContextFinalized(WorldLinkError):
    wire_name = "ContextFinalized"


class SessionsStillOpen(WorldLinkError):
    wire_name = "SessionsStillOpen"


class SessionClosed(WorldLinkError):
    wire_name = "SessionClosed"


class SessionNotAttested(WorldLinkError):
    wire_name = "SessionNotAttested"


class AttestationMismatch(WorldLinkError):
    """Fresh measurement differed from the trained reference; the session was
    refused and closed on the secure side."""

    wire_name = "AttestationMismatch"

    def __init__(self, message: str = "", closed_session_id: Optional[int] = None):
        super().__init__(message or "measured image does not match trained reference")
        self.closed_session_id = closed_session_id


class NoTrainedHash(WorldLinkError):
    wire_name = "NoTrainedHash"


class TrainingDisabled(WorldLinkError):
    wire_name = "TrainingDisabled"


class TooManyParameters(WorldLinkError):
    wire_name = "TooManyParameters"


class FileUnreadable(WorldLinkError):
    wire_name = "FileUnreadable"


class UnknownTrustedApp(WorldLinkError):
    wire_name = "UnknownTrustedApp"


class HandlerError(WorldLinkError):
    """Failure raised inside a trusted-application command handler."""

    wire_name = "HandlerError"

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


WIRE_ERRORS = {
    cls.wire_name: cls
    for cls in (
        EndpointUnreachable,
        ChannelError,
        ContextFinalized,
        SessionsStillOpen,
        SessionClosed,
        SessionNotAttested,
        AttestationMismatch,
        NoTrainedHash,
        TrainingDisabled,
        TooManyParameters,
        FileUnreadable,
        UnknownTrustedApp,
        HandlerError,
    )
}
