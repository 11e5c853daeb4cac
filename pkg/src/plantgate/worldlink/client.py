"""Normal-world client API over the framed channel.

Mirrors the classic context/session/command lifecycle: initialize a context,
open an attested session to a trusted application, invoke commands carrying up
to four parameters, close, finalize. One call is in flight per context channel
at a time; invocations on one session are mutually exclusive.
"""

from __future__ import annotations

import secrets
import socket
import threading
from typing import Optional

from plantgate.worldlink import framing
from plantgate.worldlink.errors import (
    AttestationMismatch,
    ChannelError,
    ContextFinalized,
    EndpointUnreachable,
    HandlerError,
    SessionClosed,
    SessionsStillOpen,
    WIRE_ERRORS,
    WorldLinkError,
)
from plantgate.worldlink.types import (
    ContextState,
    Direction,
    SessionState,
    WorldCommand,
    WorldContext,
    WorldSession,
    fmt_id,
    parse_id,
)


class Channel:
    """One connection to the secure world; call/response under a lock."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        family, addr = framing.parse_endpoint(endpoint)
        self._sock = socket.socket(family, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        try:
            self._sock.connect(addr)
        except (OSError, socket.timeout) as exc:
            self._sock.close()
            raise EndpointUnreachable(f"secure world not reachable at {endpoint}: {exc}") from exc
        self._lock = threading.Lock()
        self._closed = False

    def call(self, message: dict) -> dict:
        with self._lock:
            if self._closed:
                raise ChannelError("channel is closed")
            framing.send_message(self._sock, message)
            response = framing.recv_message(self._sock)
        if response.get("ok"):
            return response
        raise self._to_exception(response)

    @staticmethod
    def _to_exception(response: dict) -> WorldLinkError:
        name = response.get("error", "ChannelError")
        detail = response.get("detail", "")
        cls = WIRE_ERRORS.get(name, ChannelError)
        if cls is HandlerError:
            return HandlerError(response.get("code", "Unknown"), detail)
        if cls is AttestationMismatch:
            sid = response.get("session_id")
            return AttestationMismatch(detail, parse_id(sid) if sid else None)
        return cls(detail)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            try:
                self._sock.close()
            except OSError:
                pass


def initialize_context(sw_endpoint: str, timeout: float = 10.0) -> WorldContext:
    """Open a logical link to the secure world without naming a trusted app."""
    channel = Channel(sw_endpoint, timeout)
    ctx = WorldContext(context_id=secrets.randbits(64), sw_endpoint=sw_endpoint)
    ctx._channel = channel
    return ctx


def open_session(ctx: WorldContext, ta_id: str, image_path: str) -> WorldSession:
    """Open an attested session; the secure world measures the caller's image
    and refuses the session on mismatch with the trained reference."""
    if ctx.state is not ContextState.OPEN:
        raise ContextFinalized("cannot open a session under a finalized context")
    response = ctx._channel.call(
        {
            "kind": "OpenSession",
            "context_id": fmt_id(ctx.context_id),
            "ta_id": ta_id,
            "image_path": str(image_path),
        }
    )
    session = WorldSession(
        session_id=parse_id(response["session_id"]),
        context=ctx,
        ta_id=ta_id,
        attested=bool(response["attested"]),
    )
    session._invoke_lock = threading.Lock()
    ctx._open_sessions.add(session.session_id)
    return session


def invoke_command(session: WorldSession, cmd: WorldCommand) -> list[bytes]:
    """Run one command to completion; returns Out/InOut payloads in order.

    Out and InOut parameter payloads in ``cmd`` are rewritten in place with
    the secure world's results (shared-buffer semantics); In payloads are left
    untouched.
    """
    if session.state is not SessionState.OPEN:
        raise SessionClosed("session is closed")
    with session._invoke_lock:
        response = session.context._channel.call(
            {
                "kind": "InvokeCommand",
                "session_id": fmt_id(session.session_id),
                "command_id": cmd.command_id,
                "params": [
                    {"dir": p.direction.value, "payload": p.payload.hex()}
                    for p in cmd.params
                ],
            }
        )
    for out in response.get("outputs", []):
        param = cmd.params[out["index"]]
        if param.direction in (Direction.OUT, Direction.INOUT):
            param.payload = bytes.fromhex(out["payload"])
    return [
        p.payload for p in cmd.params if p.direction in (Direction.OUT, Direction.INOUT)
    ]


def close_session(session: WorldSession) -> None:
    """Close the session; a second close is a no-op."""
    if session.state is SessionState.CLOSED:
        return
    session.state = SessionState.CLOSED
    session.context._open_sessions.discard(session.session_id)
    try:
        session.context._channel.call(
            {"kind": "CloseSession", "session_id": fmt_id(session.session_id)}
        )
    except ChannelError:
        # Teardown may race a dying channel; the local state is authoritative.
        pass


def finalize_context(ctx: WorldContext) -> None:
    """Finalize the context; all of its sessions must be closed first."""
    if ctx.state is ContextState.FINALIZED:
        return
    if ctx._open_sessions:
        raise SessionsStillOpen(f"{len(ctx._open_sessions)} session(s) still open")
    try:
        ctx._channel.call({"kind": "FinalizeContext", "context_id": fmt_id(ctx.context_id)})
    finally:
        ctx.state = ContextState.FINALIZED
        ctx._channel.close()


def train(ctx: WorldContext, ta_id: str, image_path: str) -> None:
    """Store the image's measurement as the trusted reference (training mode only)."""
    if ctx.state is not ContextState.OPEN:
        raise ContextFinalized("cannot train under a finalized context")
    ctx._channel.call({"kind": "Train", "ta_id": ta_id, "image_path": str(image_path)})
