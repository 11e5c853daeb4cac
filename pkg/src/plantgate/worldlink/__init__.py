"""Emulated world boundary: client API, secure-world server, framed channel."""

from plantgate.worldlink.client import (
    close_session,
    finalize_context,
    initialize_context,
    invoke_command,
    open_session,
    train,
)
from plantgate.worldlink.errors import (
    AttestationMismatch,
    ChannelError,
    ContextFinalized,
    EndpointUnreachable,
    FileUnreadable,
    HandlerError,
    NoTrainedHash,
    SessionClosed,
    SessionNotAttested,
    SessionsStillOpen,
    TooManyParameters,
    TrainingDisabled,
    UnknownTrustedApp,
    WorldLinkError,
)
from plantgate.worldlink.measure import measure_image
from plantgate.worldlink.server import SecureWorldServer, TASession, TrustedApp, TAEnvironment
from plantgate.worldlink.types import (
    Direction,
    Measurement,
    Mode,
    Parameter,
    WorldCommand,
    WorldContext,
    WorldSession,
)

__all__ = [
    "initialize_context",
    "open_session",
    "invoke_command",
    "close_session",
    "finalize_context",
    "train",
    "measure_image",
    "SecureWorldServer",
    "TrustedApp",
    "TASession",
    "TAEnvironment",
    "Direction",
    "Measurement",
    "Mode",
    "Parameter",
    "WorldCommand",
    "WorldContext",
    "WorldSession",
    "WorldLinkError",
    "EndpointUnreachable",
    "ChannelError",
    "ContextFinalized",
    "SessionsStillOpen",
    "SessionClosed",
    "SessionNotAttested",
    "AttestationMismatch",
    "NoTrainedHash",
    "TrainingDisabled",
    "TooManyParameters",
    "FileUnreadable",
    "UnknownTrustedApp",
    "HandlerError",
]
