"""Gateway route logic: authentication, role resolution, command bridging.

Every handler returns (http_status, body). Authorization is decided before
any worker or network effect; denied requests produce no side effects beyond
their chronicle record.
"""

from __future__ import annotations

import hashlib
import os
import re
from pathlib import Path
from typing import Optional

from plantgate.actmgr import ActivityManager, Principal, Status
from plantgate.cmdparse import CommandKind, ParseError, parse
from plantgate.clock import Clock, SYSTEM_CLOCK
from plantgate.common import Role, role_privilege
from plantgate.datastore.auditlog import AuditLog, Outcome
from plantgate.datastore.profiles import ProfileStore
from plantgate.datastore.records import Category, DecryptFailure, RecordAccessDenied, RecordStore
from plantgate.gateway.tokens import TokenTable
from plantgate.gateway.users import UserFile

DEFAULT_FIRMWARE_CAP = 16 * 1024 * 1024

_FILENAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,127}$")

# One constant body for every login failure; no user-existence leak.
LOGIN_FAILURE = {"error": "BadCredentials"}
INVALID_TOKEN = {"error": "InvalidToken"}

_STATUS_BY_RESULT = {Status.OK: 200, Status.DENIED: 403, Status.FAILED: 502}


def _hex_word(word: int) -> str:
    return f"0x{word:04x}"


class GatewayApp:
    def __init__(
        self,
        users: UserFile,
        tokens: TokenTable,
        am: ActivityManager,
        records: RecordStore,
        profiles: ProfileStore,
        audit: AuditLog,
        staging_dir: str | Path,
        clock: Clock = SYSTEM_CLOCK,
        firmware_max_bytes: int = DEFAULT_FIRMWARE_CAP,
    ):
        self.users = users
        self.tokens = tokens
        self.am = am
        self.records = records
        self.profiles = profiles
        self.audit = audit
        self.staging_dir = Path(staging_dir)
        self.staging_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.firmware_max_bytes = firmware_max_bytes

    # -- authentication -----------------------------------------------------------

    def login(self, body: dict) -> tuple[int, dict]:
        user_id = str(body.get("user_id", ""))
        credential = str(body.get("credential", ""))
        entry = self.users.authenticate(user_id, credential)
        if entry is None:
            self.audit.append(user_id or "anonymous", "login", Outcome.DENIED)
            return 401, LOGIN_FAILURE
        principal = Principal(entry.user_id, entry.role)
        token = self.tokens.issue(principal)
        self.audit.append(entry.user_id, "login", Outcome.OK, detail=f"role={entry.role.value}")
        return 200, {
            "token": token.token,
            "role": entry.role.value,
            "expires_at_ms": token.expires_at_ms,
        }

    def authenticate(self, bearer: Optional[str]) -> Optional[Principal]:
        if not bearer:
            return None
        return self.tokens.resolve(bearer)

    def audit_reject(self, path: str) -> None:
        self.audit.append("anonymous", "auth.reject", Outcome.DENIED, detail=f"path={path}")

    # -- command bridge ---------------------------------------------------------------

    def submit_command(self, principal: Principal, body: dict) -> tuple[int, dict]:
        line = body.get("command")
        if not isinstance(line, str):
            return 400, {"error": "BadRequest", "detail": "body needs a command string"}
        try:
            cmd = parse(line)
        except ParseError as exc:
            self.audit.append(
                principal.user_id, "command.reject", Outcome.DENIED,
                detail=f"error={exc.code.value}",
            )
            return 400, {"error": exc.code.value, "detail": exc.detail}
        result = self.am.dispatch(cmd, principal)
        status = _STATUS_BY_RESULT[result.status]
        if result.status is Status.OK:
            return status, {
                "status": "ok",
                "kind": cmd.kind.value,
                "payload": self._render_payload(cmd.kind, result.payload),
                "audit_ids": result.audit_ids,
            }
        body = {
            "status": result.status.value,
            "reason": result.reason.value,
            "audit_ids": result.audit_ids,
        }
        if result.detail:
            body["detail"] = result.detail
        return status, body

    @staticmethod
    def _render_payload(kind: CommandKind, payload: dict) -> dict:
        if kind in (CommandKind.READ, CommandKind.READ_S):
            return {
                "addr": _hex_word(payload["addr"]),
                "count": payload["count"],
                "words": [_hex_word(w) for w in payload["words"]],
            }
        if kind in (CommandKind.WRITE, CommandKind.WRITE_S):
            return {"addr": _hex_word(payload["addr"]), "count": payload["count"]}
        return dict(payload)

    # -- firmware staging ---------------------------------------------------------------

    def upload_firmware(
        self, principal: Principal, filename: str, data: bytes
    ) -> tuple[int, dict]:
        if principal.role not in (Role.THIRD_PARTY, Role.ENGINEER):
            self.audit.append(
                principal.user_id, "firmware.upload", Outcome.DENIED, detail="reason=RoleForbidden"
            )
            return 403, {"error": "RoleForbidden"}
        if not _FILENAME_RE.match(filename) or ".." in filename:
            self.audit.append(
                principal.user_id, "firmware.upload", Outcome.DENIED,
                detail=f"reason=BadName name={filename!r}",
            )
            return 400, {"error": "BadName"}
        if len(data) > self.firmware_max_bytes:
            self.audit.append(
                principal.user_id, "firmware.upload", Outcome.DENIED,
                detail=f"reason=TooLarge size={len(data)}",
            )
            return 413, {"error": "TooLarge"}
        path = self.staging_dir / filename
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        digest = hashlib.sha256(data).hexdigest()
        self.audit.append(
            principal.user_id, "firmware.upload", Outcome.OK,
            detail=f"file={filename} size={len(data)} digest={digest}",
        )
        return 201, {"filename": filename, "size": len(data), "sha256": digest}

    # -- records ------------------------------------------------------------------------

    def get_records(self, principal: Principal, query: dict) -> tuple[int, dict]:
        privilege = role_privilege(principal.role)
        asset_id = int(query["asset"]) if query.get("asset") else None
        category = Category(query["category"]) if query.get("category") else None
        window = None
        if query.get("from") or query.get("to"):
            window = (
                int(query.get("from") or 0),
                int(query.get("to") or self.clock.now_ms()),
            )
        try:
            records = self.records.get_records(asset_id, category, window, privilege)
        except RecordAccessDenied as exc:
            self.audit.append(
                principal.user_id, "records.get", Outcome.DENIED,
                detail=f"reason={exc.reason.value}",
            )
            return 403, {"error": exc.reason.value}
        except DecryptFailure as exc:
            self.audit.append(
                principal.user_id, "records.get", Outcome.FAILED, detail=str(exc)
            )
            return 500, {"error": "DecryptFailure"}
        self.audit.append(
            principal.user_id, "records.get", Outcome.OK, detail=f"records={len(records)}"
        )
        return 200, {"records": [r.to_doc() for r in records]}

    # -- threat profiles ----------------------------------------------------------------------

    def get_profile(self, principal: Principal, selector: str) -> tuple[int, dict]:
        if principal.role is not Role.ADMINISTRATOR:
            self.audit.append(
                principal.user_id, "profiles.get", Outcome.DENIED, detail="reason=RoleForbidden"
            )
            return 403, {"error": "RoleForbidden"}
        document = (
            self.profiles.latest() if selector == "latest" else self.profiles.get(selector)
        )
        if document is None:
            self.audit.append(
                principal.user_id, "profiles.get", Outcome.FAILED, detail="reason=NotFound"
            )
            return 404, {"error": "NotFound"}
        self.audit.append(
            principal.user_id, "profiles.get", Outcome.OK,
            detail=f"profile={document['profile_id']}",
        )
        return 200, document

    @staticmethod
    def health() -> tuple[int, dict]:
        return 200, {"status": "ok"}
