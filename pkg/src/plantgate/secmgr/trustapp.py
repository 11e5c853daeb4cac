"""The security-manager trusted application.

Binds the policy engine to the world channel: command requests arrive as JSON
in the first In parameter, replies leave as JSON in the first Out parameter.
The storage-key command returns raw key bytes instead.
"""

from __future__ import annotations

import json

from plantgate.common import AccessDecision, Privilege, RegisterAccess, Role
from plantgate.datastore.auditlog import Outcome
from plantgate.secmgr.engine import PolicyEngine
from plantgate.secmgr.types import PolicyError
from plantgate.worldlink.errors import HandlerError
from plantgate.worldlink.server import TAEnvironment, TASession, TrustedApp
from plantgate.worldlink.types import Direction, Parameter

TA_ID = "ta.secmgr"

CMD_VALIDATE_ADDRESS = 0x10
CMD_VALIDATE_KEY = 0x11
CMD_VERIFY_FIRMWARE_PROOF = 0x12
CMD_ISSUE_STORAGE_KEY = 0x13
CMD_SECURE_AUDIT = 0x14
CMD_VALIDATE_ASSET = 0x15
CMD_ASSET_LAYOUT = 0x16


def _request(params: list[Parameter]) -> dict:
    if not params or params[0].direction is not Direction.IN:
        raise HandlerError("BadRequest", "first parameter must be an In request")
    try:
        return json.loads(params[0].payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HandlerError("BadRequest", f"undecodable request: {exc}") from exc


def _reply(params: list[Parameter], obj: dict) -> None:
    for p in params[1:]:
        if p.direction in (Direction.OUT, Direction.INOUT):
            p.payload = json.dumps(obj, sort_keys=True).encode("utf-8")
            return
    raise HandlerError("BadRequest", "no Out parameter for the reply")


class SecurityManagerTA(TrustedApp):
    ta_id = TA_ID

    def __init__(self, engine: PolicyEngine):
        self.engine = engine

    def invoke(self, session: TASession, command_id: int, params: list[Parameter]) -> None:
        try:
            self._invoke(session, command_id, params)
        except PolicyError as exc:
            raise HandlerError(exc.wire_code, str(exc)) from exc

    def _invoke(self, session: TASession, command_id: int, params: list[Parameter]) -> None:
        if command_id == CMD_ISSUE_STORAGE_KEY:
            if not session.attested:
                raise HandlerError("SessionNotAttested", "storage key requires attestation")
            key = self.engine.issue_storage_key()
            for p in params:
                if p.direction in (Direction.OUT, Direction.INOUT):
                    p.payload = key
                    return
            raise HandlerError("BadRequest", "no Out parameter for the key")

        req = _request(params)
        if command_id == CMD_VALIDATE_ADDRESS:
            decision = self.engine.validate_address(
                asset_id=int(req["asset_id"]),
                addr=int(req["addr"]),
                length=int(req["length"]),
                access=RegisterAccess(req["access"]),
                privilege=Privilege(req["privilege"]),
                principal=req.get("principal", "system"),
            )
            _reply(params, decision.to_dict())
        elif command_id == CMD_VALIDATE_KEY:
            decision = self.engine.validate_key(
                presented=bytes.fromhex(req["key_hex"]),
                required_role=Role(req["required_role"]),
                principal=req.get("principal", "system"),
            )
            _reply(params, decision.to_dict())
        elif command_id == CMD_VERIFY_FIRMWARE_PROOF:
            decision = self.engine.verify_firmware_proof(
                asset_id=int(req["asset_id"]),
                image_digest=bytes.fromhex(req["digest_hex"]),
                proof=bytes.fromhex(req["proof_hex"]),
                principal=req.get("principal", "system"),
            )
            _reply(params, decision.to_dict())
        elif command_id == CMD_VALIDATE_ASSET:
            decision = self.engine.validate_asset(
                asset_id=int(req["asset_id"]),
                principal=req.get("principal", "system"),
            )
            _reply(params, decision.to_dict())
        elif command_id == CMD_ASSET_LAYOUT:
            _reply(params, self.engine.asset_layout(int(req["asset_id"])))
        elif command_id == CMD_SECURE_AUDIT:
            seq = self.engine.secure_audit(
                principal=req.get("principal", "system"),
                activity=req["activity"],
                outcome=Outcome(req["outcome"]),
                latency_ms=req.get("latency_ms"),
                detail=req.get("detail", ""),
            )
            _reply(params, {"seq": seq})
        else:
            raise HandlerError("UnknownCommand", f"command {command_id:#x}")
