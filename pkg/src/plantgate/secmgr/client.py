"""Normal-world stub for calling the security manager over an attested session."""

from __future__ import annotations

import json
from typing import Optional

from plantgate.common import AccessDecision, Privilege, RegisterAccess, Role
from plantgate.datastore.auditlog import Outcome
from plantgate.secmgr import trustapp
from plantgate.secmgr.types import StorageFull, UnknownAsset, ZeroLength
from plantgate.worldlink import invoke_command
from plantgate.worldlink.errors import HandlerError
from plantgate.worldlink.types import Direction, Parameter, WorldCommand, WorldSession

_POLICY_ERRORS = {
    "UnknownAsset": UnknownAsset,
    "ZeroLength": ZeroLength,
    "StorageFull": StorageFull,
}


class SecureManagerClient:
    def __init__(self, session: WorldSession):
        self.session = session

    def _call(self, command_id: int, request: dict) -> dict:
        cmd = WorldCommand(
            command_id,
            [
                Parameter(Direction.IN, json.dumps(request, sort_keys=True).encode()),
                Parameter(Direction.OUT),
            ],
        )
        try:
            outs = invoke_command(self.session, cmd)
        except HandlerError as exc:
            policy_error = _POLICY_ERRORS.get(exc.code)
            if policy_error is not None:
                raise policy_error(exc.detail) from exc
            raise
        return json.loads(outs[0].decode("utf-8"))

    def validate_address(
        self,
        asset_id: int,
        addr: int,
        length: int,
        access: RegisterAccess,
        privilege: Privilege,
        principal: str = "system",
    ) -> AccessDecision:
        return AccessDecision.from_dict(
            self._call(
                trustapp.CMD_VALIDATE_ADDRESS,
                {
                    "asset_id": asset_id,
                    "addr": addr,
                    "length": length,
                    "access": access.value,
                    "privilege": privilege.value,
                    "principal": principal,
                },
            )
        )

    def validate_key(
        self, key: bytes, required_role: Role, principal: str = "system"
    ) -> AccessDecision:
        return AccessDecision.from_dict(
            self._call(
                trustapp.CMD_VALIDATE_KEY,
                {
                    "key_hex": key.hex(),
                    "required_role": required_role.value,
                    "principal": principal,
                },
            )
        )

    def verify_firmware_proof(
        self, asset_id: int, image_digest: bytes, proof: bytes, principal: str = "system"
    ) -> AccessDecision:
        return AccessDecision.from_dict(
            self._call(
                trustapp.CMD_VERIFY_FIRMWARE_PROOF,
                {
                    "asset_id": asset_id,
                    "digest_hex": image_digest.hex(),
                    "proof_hex": proof.hex(),
                    "principal": principal,
                },
            )
        )

    def validate_asset(self, asset_id: int, principal: str = "system") -> AccessDecision:
        return AccessDecision.from_dict(
            self._call(trustapp.CMD_VALIDATE_ASSET, {"asset_id": asset_id, "principal": principal})
        )

    def asset_layout(self, asset_id: int) -> dict:
        return self._call(trustapp.CMD_ASSET_LAYOUT, {"asset_id": asset_id})

    def issue_storage_key(self) -> bytes:
        cmd = WorldCommand(trustapp.CMD_ISSUE_STORAGE_KEY, [Parameter(Direction.OUT)])
        outs = invoke_command(self.session, cmd)
        return outs[0]

    def secure_audit(
        self,
        principal: str,
        activity: str,
        outcome: Outcome,
        latency_ms: Optional[int] = None,
        detail: str = "",
    ) -> int:
        reply = self._call(
            trustapp.CMD_SECURE_AUDIT,
            {
                "principal": principal,
                "activity": activity,
                "outcome": outcome.value,
                "latency_ms": latency_ms,
                "detail": detail,
            },
        )
        return reply["seq"]
