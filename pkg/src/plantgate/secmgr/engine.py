"""Policy decisions made inside the secure world.

Every decision is appended to the secure chronicle log. Key comparisons run
over the full fixed length regardless of where a mismatch occurs.
"""

from __future__ import annotations

import hmac
import hashlib
import os
import secrets
import threading
from pathlib import Path
from typing import Optional

from plantgate.common import AccessDecision, DenialReason, Privilege, RegisterAccess, Role
from plantgate.datastore.auditlog import AuditLog, Outcome
from plantgate.secmgr.types import (
    AssetPolicy,
    ROLE_KEY_SIZE,
    StorageFull,
    UnknownAsset,
    ZeroLength,
)

STORAGE_KEY_SIZE = 32


class PolicyEngine:
    def __init__(
        self,
        assets: dict[int, AssetPolicy],
        role_keys: dict[Role, bytes],
        storage_dir: str | Path,
        audit: AuditLog,
    ):
        if set(role_keys) != set(Role):
            missing = {r.value for r in Role} - {r.value for r in role_keys}
            raise ValueError(f"key store must hold exactly one key per role; missing {missing}")
        for role, key in role_keys.items():
            if len(key) != ROLE_KEY_SIZE:
                raise ValueError(f"{role.value} key must be {ROLE_KEY_SIZE} bytes")
        self.assets = dict(assets)
        self._role_keys = dict(role_keys)
        self.storage_dir = Path(storage_dir)
        self.audit = audit
        self._storage_key_lock = threading.Lock()

    # -- address policy ------------------------------------------------------

    def validate_address(
        self,
        asset_id: int,
        addr: int,
        length: int,
        access: RegisterAccess,
        privilege: Privilege,
        principal: str = "system",
    ) -> AccessDecision:
        detail = (
            f"asset={asset_id} addr={addr:#06x} len={length} "
            f"access={access.value} priv={privilege.value}"
        )
        if length < 1:
            self._audit("sm.validate_address", Outcome.FAILED, principal, f"{detail} error=ZeroLength")
            raise ZeroLength("window length must be at least 1")
        policy = self.assets.get(asset_id)
        if policy is None:
            self._audit("sm.validate_address", Outcome.FAILED, principal, f"{detail} error=UnknownAsset")
            raise UnknownAsset(f"no policy for asset {asset_id}")

        lo, hi = policy.register_space
        end = addr + length - 1
        if addr < lo or end > hi:
            decision = AccessDecision.deny(DenialReason.OUT_OF_RANGE)
        elif privilege is Privilege.NON_CONFIDENTIAL_ONLY and self._overlaps_confidential(
            policy, addr, end
        ):
            decision = AccessDecision.deny(DenialReason.CONFIDENTIAL_OVERLAP)
        else:
            decision = AccessDecision.allow()
        self._audit_decision("sm.validate_address", decision, principal, detail)
        return decision

    @staticmethod
    def _overlaps_confidential(policy: AssetPolicy, addr: int, end: int) -> bool:
        return any(addr <= b and end >= a for a, b in policy.confidential_ranges)

    # -- key and proof validation -------------------------------------------------

    def validate_key(
        self, presented: bytes, required_role: Role, principal: str = "system"
    ) -> AccessDecision:
        stored = self._role_keys[required_role]
        if len(presented) != ROLE_KEY_SIZE:
            # Fixed-cost compare against the stored key even for bad lengths.
            hmac.compare_digest(stored, stored)
            decision = AccessDecision.deny(DenialReason.BAD_KEY)
        elif hmac.compare_digest(stored, presented):
            decision = AccessDecision.allow()
        else:
            decision = AccessDecision.deny(DenialReason.BAD_KEY)
        self._audit_decision(
            "sm.validate_key", decision, principal, f"role={required_role.value}"
        )
        return decision

    def verify_firmware_proof(
        self,
        asset_id: int,
        image_digest: bytes,
        proof: bytes,
        principal: str = "system",
    ) -> AccessDecision:
        policy = self.assets.get(asset_id)
        if policy is None:
            self._audit(
                "sm.verify_firmware_proof",
                Outcome.FAILED,
                principal,
                f"asset={asset_id} error=UnknownAsset",
            )
            raise UnknownAsset(f"no policy for asset {asset_id}")
        if len(image_digest) == 0:
            decision = AccessDecision.deny(DenialReason.ZERO_LENGTH)
        else:
            expected = hmac.new(policy.device_key, image_digest, hashlib.sha256).digest()
            if hmac.compare_digest(expected, proof):
                decision = AccessDecision.allow()
            else:
                decision = AccessDecision.deny(DenialReason.BAD_KEY)
        self._audit_decision(
            "sm.verify_firmware_proof",
            decision,
            principal,
            f"asset={asset_id} digest={image_digest.hex()}",
        )
        return decision

    # -- asset identity and layout ----------------------------------------------

    def validate_asset(self, asset_id: int, principal: str = "system") -> AccessDecision:
        if asset_id not in self.assets:
            self._audit(
                "sm.validate_asset",
                Outcome.FAILED,
                principal,
                f"asset={asset_id} error=UnknownAsset",
            )
            raise UnknownAsset(f"no policy for asset {asset_id}")
        decision = AccessDecision.allow()
        self._audit_decision("sm.validate_asset", decision, principal, f"asset={asset_id}")
        return decision

    def asset_layout(self, asset_id: int) -> dict:
        """Non-secret register layout, the basis for capture-time categorization."""
        policy = self.assets.get(asset_id)
        if policy is None:
            raise UnknownAsset(f"no policy for asset {asset_id}")
        return {
            "asset_id": asset_id,
            "register_space": list(policy.register_space),
            "confidential_ranges": [list(r) for r in policy.confidential_ranges],
        }

    # -- storage key ----------------------------------------------------------------

    def issue_storage_key(self) -> bytes:
        """The persistent data-at-rest key; generated once and sealed in SW storage."""
        path = self.storage_dir / "storage_key.bin"
        with self._storage_key_lock:
            if path.exists():
                return path.read_bytes()
            key = secrets.token_bytes(STORAGE_KEY_SIZE)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(key)
            os.chmod(tmp, 0o600)
            os.replace(tmp, path)
        self._audit("sm.issue_storage_key", Outcome.OK, "system", "generated")
        return key

    # -- chronicle -----------------------------------------------------------------

    def secure_audit(
        self,
        principal: str,
        activity: str,
        outcome: Outcome,
        latency_ms: Optional[int] = None,
        detail: str = "",
    ) -> int:
        try:
            return self.audit.append(principal, activity, outcome, latency_ms, detail).seq
        except OSError as exc:
            raise StorageFull(str(exc)) from exc

    def _audit_decision(
        self, activity: str, decision: AccessDecision, principal: str, detail: str
    ) -> None:
        if decision.allowed:
            self._audit(activity, Outcome.OK, principal, f"{detail} verdict=allow")
        else:
            self._audit(
                activity,
                Outcome.DENIED,
                principal,
                f"{detail} verdict=deny reason={decision.reason.value}",
            )

    def _audit(self, activity: str, outcome: Outcome, principal: str, detail: str) -> None:
        self.audit.append(principal, activity, outcome, detail=detail)
