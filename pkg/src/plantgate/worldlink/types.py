"""Value types for the world boundary: contexts, sessions, commands, measurements."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from plantgate.worldlink.errors import TooManyParameters

MAX_PARAMS = 4

HASH_ALGOS = {"sha1": hashlib.sha1, "sha256": hashlib.sha256}
DEFAULT_HASH_ALGO = "sha1"


class Mode(Enum):
    TRAINING = "training"
    NORMAL = "normal"


class ContextState(Enum):
    OPEN = "open"
    FINALIZED = "finalized"


class SessionState(Enum):
    OPEN = "open"
    CLOSED = "closed"


class Direction(Enum):
    IN = "in"
    OUT = "out"
    INOUT = "inout"


@dataclass
class Parameter:
    """One slot of cross-world shared memory.

    Out/InOut payloads are rewritten in place by the secure world before the
    call returns; In payloads are never touched.
    """

    direction: Direction
    payload: bytes = b""


@dataclass
class WorldCommand:
    """A command invocation: 32-bit code plus at most four parameters."""

    command_id: int
    params: list[Parameter] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.command_id < 2**32:
            raise ValueError(f"command_id out of 32-bit range: {self.command_id}")
        if len(self.params) > MAX_PARAMS:
            raise TooManyParameters(
                f"{len(self.params)} parameters; at most {MAX_PARAMS} allowed"
            )


@dataclass(frozen=True)
class Measurement:
    """Digest of an image file, taken with the configured hash algorithm."""

    image_path: str
    digest: bytes
    algo: str = DEFAULT_HASH_ALGO
    mode: Mode = Mode.NORMAL

    def __post_init__(self):
        expected = HASH_ALGOS[self.algo]().digest_size
        if len(self.digest) != expected:
            raise ValueError(
                f"{self.algo} digest must be {expected} bytes, got {len(self.digest)}"
            )


@dataclass
class WorldContext:
    """Client-side handle for a logical link to the secure world.

    A finalized context accepts no further session openings; every session
    references exactly one open context.
    """

    context_id: int
    sw_endpoint: str
    state: ContextState = ContextState.OPEN
    # Channel and open-session bookkeeping are owned by the client module.
    _channel: object = field(default=None, repr=False)
    _open_sessions: set = field(default_factory=set, repr=False)


@dataclass
class WorldSession:
    """Client-side handle for a live link to one trusted application."""

    session_id: int
    context: WorldContext
    ta_id: str
    attested: bool
    state: SessionState = SessionState.OPEN
    _invoke_lock: object = field(default=None, repr=False)


def fmt_id(value: int) -> str:
    return f"{value:016x}"


def parse_id(value: str) -> int:
    return int(value, 16)
