"""Secure-world process: channel server, session registry, attestation.

The server owns the secure side of the world boundary. It accepts framed
messages from normal-world clients, verifies callers at session opening by
measuring their registered image against the trained reference, and hands
attested invocations to the hosted trusted applications one at a time
(single-lane monitor semantics: one global command lock).
"""

from __future__ import annotations

import json
import os
import secrets
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from plantgate.clock import Clock, SYSTEM_CLOCK
from plantgate.datastore.auditlog import AuditLog, Outcome, World
from plantgate.worldlink import framing
from plantgate.worldlink.errors import (
    AttestationMismatch,
    ChannelError,
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
from plantgate.worldlink.types import (
    DEFAULT_HASH_ALGO,
    MAX_PARAMS,
    Direction,
    Mode,
    Parameter,
    SessionState,
    fmt_id,
    parse_id,
)


@dataclass
class TAEnvironment:
    """What the secure world provides to a hosted trusted application."""

    storage_dir: Path
    audit: AuditLog
    clock: Clock
    mode: Mode
    hash_algo: str


@dataclass
class TASession:
    """Secure-side view of one session."""

    session_id: int
    context_id: int
    ta_id: str
    attested: bool
    state: SessionState = SessionState.OPEN
    data: dict = field(default_factory=dict)


class TrustedApp:
    """Base class for applications hosted in the secure world.

    ``on_create`` runs exactly once per process lifetime, before any session;
    ``on_destroy`` runs once at shutdown. ``invoke`` receives the decoded
    parameter list and mutates Out/InOut payloads in place.
    """

    ta_id: str = "ta.base"

    def on_create(self, env: TAEnvironment) -> None:
        pass

    def on_open_session(self, session: TASession) -> None:
        pass

    def invoke(self, session: TASession, command_id: int, params: list[Parameter]) -> None:
        raise HandlerError("UnknownCommand", f"command {command_id:#x} not handled")

    def on_close_session(self, session: TASession) -> None:
        pass

    def on_destroy(self) -> None:
        pass


class TrainedHashStore:
    """Reference measurements persisted in secure storage, keyed by TA id."""

    def __init__(self, path: Path):
        self.path = path
        self._entries: dict[str, dict] = {}
        if path.exists():
            self._entries = json.loads(path.read_text(encoding="utf-8"))

    def get(self, ta_id: str) -> Optional[dict]:
        return self._entries.get(ta_id)

    def put(self, ta_id: str, algo: str, digest: bytes) -> None:
        self._entries[ta_id] = {"algo": algo, "digest": digest.hex()}
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._entries, sort_keys=True), encoding="utf-8")
        os.replace(tmp, self.path)


class SecureWorldServer:
    """Hosts trusted applications behind the framed channel."""

    def __init__(
        self,
        endpoint: str,
        mode: Mode,
        storage_dir: str | Path,
        apps: list[TrustedApp],
        hash_algo: str = DEFAULT_HASH_ALGO,
        clock: Clock = SYSTEM_CLOCK,
    ):
        self._requested_endpoint = endpoint
        self.mode = mode
        self.storage_dir = Path(storage_dir)
        self.storage_dir.mkdir(parents=True, exist_ok=True)
        self.hash_algo = hash_algo
        self.clock = clock
        self.audit = AuditLog(self.storage_dir / "sw_audit.log", World.SW, clock)
        self.apps = {app.ta_id: app for app in apps}
        self.create_calls: dict[str, int] = {app.ta_id: 0 for app in apps}
        self._trained = TrainedHashStore(self.storage_dir / "trained_hashes.json")
        self._sessions: dict[int, TASession] = {}
        self._context_sessions: dict[int, set[int]] = {}
        # Single-lane monitor semantics: one command serviced at a time.
        self._command_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._listener: Optional[socket.socket] = None
        self._unix_path: Optional[str] = None
        self._threads: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self._stopping = threading.Event()
        self.endpoint: str = endpoint

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "SecureWorldServer":
        family, addr = framing.parse_endpoint(self._requested_endpoint)
        listener = socket.socket(family, socket.SOCK_STREAM)
        if family == socket.AF_INET:
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        else:
            self._unix_path = addr
            if os.path.exists(addr):
                os.unlink(addr)
        listener.bind(addr)
        listener.listen(16)
        # Polling accept so stop() can interrupt the accept loop promptly.
        listener.settimeout(0.1)
        if family == socket.AF_INET:
            host, port = listener.getsockname()
            self.endpoint = f"{host}:{port}"
        self._listener = listener
        env = TAEnvironment(
            storage_dir=self.storage_dir,
            audit=self.audit,
            clock=self.clock,
            mode=self.mode,
            hash_algo=self.hash_algo,
        )
        for ta_id, app in self.apps.items():
            app.on_create(env)
            self.create_calls[ta_id] += 1
        accept = threading.Thread(target=self._accept_loop, daemon=True, name="sw-accept")
        accept.start()
        self._threads.append(accept)
        return self

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for conn in list(self._conns):
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=2.0)
        if self._unix_path and os.path.exists(self._unix_path):
            os.unlink(self._unix_path)
        for app in self.apps.values():
            app.on_destroy()

    # -- connection handling -------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)
            self._conns.append(conn)
            thread = threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True, name="sw-conn"
            )
            thread.start()
            self._threads.append(thread)

    def _serve_connection(self, conn: socket.socket) -> None:
        opened_here: set[int] = set()
        try:
            while not self._stopping.is_set():
                try:
                    message = framing.recv_message(conn)
                except ChannelError:
                    break
                response = self._handle(message, opened_here)
                try:
                    framing.send_message(conn, response)
                except ChannelError:
                    break
        finally:
            self._autoclose(opened_here)
            try:
                conn.close()
            except OSError:
                pass

    def _autoclose(self, session_ids: set[int]) -> None:
        with self._command_lock:
            for sid in session_ids:
                session = self._sessions.get(sid)
                if session is not None and session.state is SessionState.OPEN:
                    self._close_session(session)
                    self.audit.append(
                        "system",
                        "ta.session_autoclose",
                        Outcome.OK,
                        detail=f"ta={session.ta_id}",
                    )

    # -- message dispatch ------------------------------------------------------

    def _handle(self, message: dict, opened_here: set[int]) -> dict:
        with self._command_lock:
            try:
                kind = message.get("kind")
                if kind == "OpenSession":
                    return self._handle_open(message, opened_here)
                if kind == "InvokeCommand":
                    return self._handle_invoke(message)
                if kind == "CloseSession":
                    return self._handle_close(message)
                if kind == "FinalizeContext":
                    return self._handle_finalize(message)
                if kind == "Train":
                    return self._handle_train(message)
                raise ChannelError(f"unknown message kind {kind!r}")
            except WorldLinkError as exc:
                return self._error_response(exc)

    @staticmethod
    def _error_response(exc: WorldLinkError) -> dict:
        resp = {"kind": "Result", "ok": False, "error": exc.wire_name, "detail": str(exc)}
        if isinstance(exc, HandlerError):
            resp["code"] = exc.code
        if isinstance(exc, AttestationMismatch) and exc.closed_session_id is not None:
            resp["session_id"] = fmt_id(exc.closed_session_id)
        return resp

    def _handle_open(self, message: dict, opened_here: set[int]) -> dict:
        context_id = parse_id(message["context_id"])
        ta_id = message["ta_id"]
        image_path = message["image_path"]
        app = self.apps.get(ta_id)
        if app is None:
            raise UnknownTrustedApp(ta_id)

        try:
            measurement = measure_image(image_path, self.hash_algo)
        except FileUnreadable:
            self.audit.append(
                "system",
                "ta.session_open",
                Outcome.FAILED,
                detail=f"ta={ta_id} error=FileUnreadable",
            )
            raise

        if self.mode is Mode.TRAINING:
            # Provisioning phase: every opening refreshes the reference.
            self._trained.put(ta_id, self.hash_algo, measurement.digest)
        else:
            trained = self._trained.get(ta_id)
            if trained is None:
                self.audit.append(
                    "system",
                    "ta.session_open",
                    Outcome.DENIED,
                    detail=f"ta={ta_id} error=NoTrainedHash",
                )
                raise NoTrainedHash(f"no trained reference for {ta_id}")
            if trained["algo"] != self.hash_algo or bytes.fromhex(trained["digest"]) != measurement.digest:
                # Refused: the session is registered already closed so later
                # invocations against its id fail as SessionClosed.
                closed = self._register_session(context_id, ta_id, attested=False)
                closed.state = SessionState.CLOSED
                with self._state_lock:
                    self._context_sessions.get(context_id, set()).discard(closed.session_id)
                self.audit.append(
                    "system",
                    "ta.session_open",
                    Outcome.DENIED,
                    detail=f"ta={ta_id} match=false",
                )
                raise AttestationMismatch(closed_session_id=closed.session_id)

        session = self._register_session(context_id, ta_id, attested=True)
        opened_here.add(session.session_id)
        app.on_open_session(session)
        self.audit.append(
            "system",
            "ta.session_open",
            Outcome.OK,
            detail=f"ta={ta_id} mode={self.mode.value} match=true",
        )
        return {
            "kind": "Result",
            "ok": True,
            "session_id": fmt_id(session.session_id),
            "attested": True,
        }

    def _register_session(self, context_id: int, ta_id: str, attested: bool) -> TASession:
        session = TASession(
            session_id=secrets.randbits(64),
            context_id=context_id,
            ta_id=ta_id,
            attested=attested,
        )
        with self._state_lock:
            self._sessions[session.session_id] = session
            self._context_sessions.setdefault(context_id, set()).add(session.session_id)
        return session

    def _handle_invoke(self, message: dict) -> dict:
        session = self._sessions.get(parse_id(message["session_id"]))
        if session is None or session.state is not SessionState.OPEN:
            raise SessionClosed("no open session with that id")
        if not session.attested:
            raise SessionNotAttested("session is not attested")
        raw_params = message.get("params", [])
        if len(raw_params) > MAX_PARAMS:
            raise TooManyParameters(f"{len(raw_params)} parameters on the wire")
        params = [
            Parameter(Direction(p["dir"]), bytes.fromhex(p["payload"]))
            for p in raw_params
        ]
        command_id = int(message["command_id"])
        app = self.apps[session.ta_id]
        try:
            app.invoke(session, command_id, params)
        except HandlerError as exc:
            self.audit.append(
                "system",
                "ta.invoke",
                Outcome.FAILED,
                detail=f"ta={session.ta_id} cmd={command_id:#06x} error={exc.code}",
            )
            raise
        except WorldLinkError:
            raise
        except Exception as exc:  # handler bug must not take the world down
            self.audit.append(
                "system",
                "ta.invoke",
                Outcome.FAILED,
                detail=f"ta={session.ta_id} cmd={command_id:#06x} error=InternalError",
            )
            raise HandlerError("InternalError", repr(exc))
        self.audit.append(
            "system",
            "ta.invoke",
            Outcome.OK,
            detail=f"ta={session.ta_id} cmd={command_id:#06x}",
        )
        outputs = [
            {"index": i, "payload": p.payload.hex()}
            for i, p in enumerate(params)
            if p.direction in (Direction.OUT, Direction.INOUT)
        ]
        return {"kind": "Result", "ok": True, "outputs": outputs}

    def _handle_close(self, message: dict) -> dict:
        session = self._sessions.get(parse_id(message["session_id"]))
        if session is not None and session.state is SessionState.OPEN:
            self._close_session(session)
        return {"kind": "Result", "ok": True}

    def _close_session(self, session: TASession) -> None:
        session.state = SessionState.CLOSED
        with self._state_lock:
            siblings = self._context_sessions.get(session.context_id)
            if siblings is not None:
                siblings.discard(session.session_id)
        self.apps[session.ta_id].on_close_session(session)

    def _handle_finalize(self, message: dict) -> dict:
        context_id = parse_id(message["context_id"])
        with self._state_lock:
            open_ids = self._context_sessions.get(context_id, set())
        if open_ids:
            raise SessionsStillOpen(f"{len(open_ids)} session(s) still open")
        with self._state_lock:
            self._context_sessions.pop(context_id, None)
        return {"kind": "Result", "ok": True}

    def _handle_train(self, message: dict) -> dict:
        if self.mode is not Mode.TRAINING:
            raise TrainingDisabled("secure world is running in normal mode")
        ta_id = message["ta_id"]
        if ta_id not in self.apps:
            raise UnknownTrustedApp(ta_id)
        measurement = measure_image(message["image_path"], self.hash_algo)
        self._trained.put(ta_id, self.hash_algo, measurement.digest)
        self.audit.append(
            "system",
            "ta.train",
            Outcome.OK,
            detail=f"ta={ta_id} algo={self.hash_algo}",
        )
        return {"kind": "Result", "ok": True}
