"""Activity manager: role gate, worker orchestration, normal-world chronicle.

Each activity follows its fixed step order, auditing every step, and no
network traffic ever precedes a passed authorization check:

    diagnostic (read/write):   address validation -> connect -> io -> disconnect
    firmware (update):         asset validation -> transfer -> proof verification
    maintenance (read_s/write_s): key validation -> address validation -> io
    record storing (store_s):  key validation -> layout -> snapshot -> two puts
    profiling (gen_threat_profile_s): key validation -> log fetch -> build -> persist
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Callable, Optional

from plantgate import netclient, threatprofile
from plantgate.actmgr.types import ActivityResult, Principal, ResultReason, Status
from plantgate.clock import Clock, SYSTEM_CLOCK
from plantgate.cmdparse import CommandKind, ValidatedCommand
from plantgate.common import AccessDecision, DenialReason, Privilege, RegisterAccess, Role
from plantgate.datastore.auditlog import AuditLog, Outcome, read_logs
from plantgate.datastore.profiles import ProfileStore
from plantgate.datastore.records import Category, RecordStore, StorageError
from plantgate.secmgr.client import SecureManagerClient
from plantgate.secmgr.types import UnknownAsset

# Legitimate roles per command kind.
ROLE_GATE: dict[CommandKind, frozenset[Role]] = {
    CommandKind.READ: frozenset({Role.THIRD_PARTY}),
    CommandKind.WRITE: frozenset({Role.THIRD_PARTY}),
    CommandKind.UPDATE: frozenset({Role.THIRD_PARTY}),
    CommandKind.READ_S: frozenset({Role.ENGINEER, Role.SCHEDULER}),
    CommandKind.WRITE_S: frozenset({Role.ENGINEER, Role.SCHEDULER}),
    CommandKind.STORE_S: frozenset({Role.ENGINEER, Role.SCHEDULER}),
    CommandKind.GEN_THREAT_PROFILE_S: frozenset({Role.ADMINISTRATOR, Role.SCHEDULER}),
}

_REASON_BY_DENIAL = {
    DenialReason.CONFIDENTIAL_OVERLAP: ResultReason.CONFIDENTIAL_OVERLAP,
    DenialReason.OUT_OF_RANGE: ResultReason.OUT_OF_RANGE,
    DenialReason.BAD_KEY: ResultReason.BAD_KEY,
    DenialReason.ROLE_FORBIDDEN: ResultReason.ROLE_FORBIDDEN,
    DenialReason.ZERO_LENGTH: ResultReason.ZERO_LENGTH,
}


class ActivityManager:
    def __init__(
        self,
        sm: SecureManagerClient,
        asset_endpoints: dict[int, str],
        records: RecordStore,
        profiles: ProfileStore,
        audit: AuditLog,
        log_paths: list[str | Path],
        staging_dir: str | Path,
        clock: Clock = SYSTEM_CLOCK,
        profile_window_ms: int = 3_600_000,
        anomaly_z_threshold: float = threatprofile.DEFAULT_Z_THRESHOLD,
        baseline_profiles: int = 5,
        connect_timeout: float = netclient.DEFAULT_TIMEOUT,
        firmware_chunk_size: int = 1024,
    ):
        self.sm = sm
        self.asset_endpoints = dict(asset_endpoints)
        self.records = records
        self.profiles = profiles
        self.audit = audit
        self.log_paths = [Path(p) for p in log_paths]
        self.staging_dir = Path(staging_dir)
        self.staging_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.profile_window_ms = profile_window_ms
        self.anomaly_z_threshold = anomaly_z_threshold
        self.baseline_profiles = baseline_profiles
        self.connect_timeout = connect_timeout
        self.firmware_chunk_size = firmware_chunk_size
        # Test seam: corrupts firmware chunks in transit when set.
        self.firmware_fault_hook: Optional[Callable[[int, bytes], bytes]] = None

    # -- entry point -------------------------------------------------------------

    def dispatch(self, cmd: ValidatedCommand, who: Principal) -> ActivityResult:
        """Apply the role gate, then run the matching worker to completion."""
        started = self.clock.now_ms()
        trail: list[int] = []
        if who.role not in ROLE_GATE[cmd.kind]:
            result = ActivityResult(Status.DENIED, reason=ResultReason.ROLE_FORBIDDEN)
        else:
            worker = {
                CommandKind.READ: self._run_diagnostic,
                CommandKind.WRITE: self._run_diagnostic,
                CommandKind.UPDATE: self._run_firmware_update,
                CommandKind.READ_S: self._run_maintenance,
                CommandKind.WRITE_S: self._run_maintenance,
                CommandKind.STORE_S: self._run_store,
                CommandKind.GEN_THREAT_PROFILE_S: self._run_threat_profile,
            }[cmd.kind]
            result = worker(cmd, who, trail)
        latency = max(0, self.clock.now_ms() - started)
        outcome = {
            Status.OK: Outcome.OK,
            Status.DENIED: Outcome.DENIED,
            Status.FAILED: Outcome.FAILED,
        }[result.status]
        detail = "" if result.ok else f"reason={result.reason.value}"
        if result.detail:
            detail = f"{detail} {result.detail}".strip()
        trail.append(
            self.audit.append(who.user_id, cmd.kind.value, outcome, latency, detail).seq
        )
        result.audit_ids = trail
        return result

    # -- step helpers ----------------------------------------------------------------

    def _step(self, trail: list[int], who: Principal, activity: str, outcome: Outcome, detail: str = "") -> None:
        trail.append(self.audit.append(who.user_id, activity, outcome, detail=detail).seq)

    def _step_decision(
        self,
        trail: list[int],
        who: Principal,
        activity: str,
        decision: AccessDecision,
        detail: str = "",
    ) -> None:
        if decision.allowed:
            self._step(trail, who, activity, Outcome.OK, detail)
        else:
            suffix = f"reason={decision.reason.value}"
            self._step(
                trail, who, activity, Outcome.DENIED, f"{detail} {suffix}".strip()
            )

    @staticmethod
    def _denied(decision: AccessDecision) -> ActivityResult:
        return ActivityResult(Status.DENIED, reason=_REASON_BY_DENIAL[decision.reason])

    def _connect(self, asset_id: int):
        endpoint = self.asset_endpoints.get(asset_id)
        if endpoint is None:
            raise netclient.ConnectRefused(f"no endpoint configured for asset {asset_id}")
        return netclient.connect(asset_id, endpoint, self.connect_timeout)

    # -- diagnostic management (read/write at third-party privilege) -------------------

    def _run_diagnostic(
        self, cmd: ValidatedCommand, who: Principal, trail: list[int]
    ) -> ActivityResult:
        return self._read_write(cmd, who, trail, Privilege.NON_CONFIDENTIAL_ONLY)

    # -- control-level management (read_s/write_s at full privilege) --------------------

    def _run_maintenance(
        self, cmd: ValidatedCommand, who: Principal, trail: list[int]
    ) -> ActivityResult:
        decision = self.sm.validate_key(cmd.key, who.role, who.user_id)
        self._step_decision(trail, who, "sm.validate_key", decision)
        if not decision.allowed:
            # Key failure stops the flow before any address validation.
            return self._denied(decision)
        return self._read_write(cmd, who, trail, Privilege.FULL)

    def _read_write(
        self,
        cmd: ValidatedCommand,
        who: Principal,
        trail: list[int],
        privilege: Privilege,
    ) -> ActivityResult:
        writing = cmd.kind in (CommandKind.WRITE, CommandKind.WRITE_S)
        access = RegisterAccess.WRITE if writing else RegisterAccess.READ
        window = f"asset={cmd.asset_id} addr={cmd.addr:#06x} len={cmd.length}"
        try:
            decision = self.sm.validate_address(
                cmd.asset_id, cmd.addr, cmd.length, access, privilege, who.user_id
            )
        except UnknownAsset:
            self._step(trail, who, "sm.validate_address", Outcome.FAILED, f"{window} error=UnknownAsset")
            return ActivityResult(Status.DENIED, reason=ResultReason.UNKNOWN_ASSET)
        self._step_decision(trail, who, "sm.validate_address", decision, window)
        if not decision.allowed:
            return self._denied(decision)

        conn = None
        try:
            conn = self._connect(cmd.asset_id)
            self._step(trail, who, "nc.connect", Outcome.OK, f"endpoint={conn.endpoint}")
            if writing:
                netclient.write_registers(conn, cmd.addr, list(cmd.data))
                self._step(trail, who, "nc.write", Outcome.OK, window)
                payload = {"addr": cmd.addr, "count": cmd.length}
            else:
                words = netclient.read_registers(conn, cmd.addr, cmd.length)
                self._step(trail, who, "nc.read", Outcome.OK, window)
                payload = {"addr": cmd.addr, "count": cmd.length, "words": words}
        except netclient.NetClientError as exc:
            self._step(trail, who, "nc.error", Outcome.FAILED, str(exc))
            return ActivityResult(
                Status.FAILED, reason=ResultReason.NETWORK_ERROR, detail=str(exc)
            )
        finally:
            if conn is not None:
                netclient.disconnect(conn)
                self._step(trail, who, "nc.disconnect", Outcome.OK)
        return ActivityResult(Status.OK, payload=payload)

    # -- firmware management ----------------------------------------------------------

    def _staged_image(self, filename: str) -> Optional[Path]:
        # The filename names a staged file, never a client path.
        if "/" in filename or "\\" in filename or filename in (".", "..") or not filename:
            return None
        path = self.staging_dir / filename
        return path if path.is_file() else None

    def _run_firmware_update(
        self, cmd: ValidatedCommand, who: Principal, trail: list[int]
    ) -> ActivityResult:
        try:
            decision = self.sm.validate_asset(cmd.asset_id, who.user_id)
        except UnknownAsset:
            self._step(
                trail, who, "sm.validate_asset", Outcome.FAILED,
                f"asset={cmd.asset_id} error=UnknownAsset",
            )
            return ActivityResult(Status.DENIED, reason=ResultReason.UNKNOWN_ASSET)
        self._step_decision(trail, who, "sm.validate_asset", decision, f"asset={cmd.asset_id}")

        image_path = self._staged_image(cmd.filename)
        if image_path is None:
            self._step(trail, who, "fw.stage", Outcome.FAILED, f"file={cmd.filename!r} missing")
            return ActivityResult(
                Status.FAILED,
                reason=ResultReason.TRANSFER_ERROR,
                detail=f"no staged file {cmd.filename!r}",
            )
        image = image_path.read_bytes()
        digest = hashlib.sha256(image).digest()

        conn = None
        try:
            conn = self._connect(cmd.asset_id)
            self._step(trail, who, "nc.connect", Outcome.OK, f"endpoint={conn.endpoint}")
            proof = netclient.transfer_firmware(
                conn,
                image,
                chunk_size=self.firmware_chunk_size,
                fault_hook=self.firmware_fault_hook,
            )
            self._step(
                trail, who, "nc.transfer", Outcome.OK, f"bytes={len(image)} digest={digest.hex()}"
            )
        except netclient.TransferError as exc:
            self._step(trail, who, "nc.transfer", Outcome.FAILED, str(exc))
            return ActivityResult(
                Status.FAILED, reason=ResultReason.TRANSFER_ERROR, detail=str(exc)
            )
        except netclient.NetClientError as exc:
            self._step(trail, who, "nc.error", Outcome.FAILED, str(exc))
            return ActivityResult(
                Status.FAILED, reason=ResultReason.NETWORK_ERROR, detail=str(exc)
            )
        finally:
            if conn is not None:
                netclient.disconnect(conn)
                self._step(trail, who, "nc.disconnect", Outcome.OK)

        verdict = self.sm.verify_firmware_proof(cmd.asset_id, digest, proof, who.user_id)
        self._step_decision(
            trail, who, "sm.verify_firmware_proof", verdict, f"asset={cmd.asset_id}"
        )
        if not verdict.allowed:
            return ActivityResult(
                Status.FAILED,
                reason=ResultReason.PROOF_INVALID,
                detail="install proof did not verify",
            )
        return ActivityResult(
            Status.OK,
            payload={
                "asset_id": cmd.asset_id,
                "size": len(image),
                "digest": digest.hex(),
                "proof": proof.hex(),
            },
        )

    # -- control-level record storing ----------------------------------------------------

    def _run_store(
        self, cmd: ValidatedCommand, who: Principal, trail: list[int]
    ) -> ActivityResult:
        decision = self.sm.validate_key(cmd.key, who.role, who.user_id)
        self._step_decision(trail, who, "sm.validate_key", decision)
        if not decision.allowed:
            return self._denied(decision)

        try:
            layout = self.sm.asset_layout(cmd.asset_id)
        except UnknownAsset:
            self._step(
                trail, who, "sm.asset_layout", Outcome.FAILED,
                f"asset={cmd.asset_id} error=UnknownAsset",
            )
            return ActivityResult(Status.DENIED, reason=ResultReason.UNKNOWN_ASSET)
        self._step(trail, who, "sm.asset_layout", Outcome.OK, f"asset={cmd.asset_id}")
        lo, hi = layout["register_space"]
        confidential_ranges = [tuple(r) for r in layout["confidential_ranges"]]

        conn = None
        try:
            conn = self._connect(cmd.asset_id)
            self._step(trail, who, "nc.connect", Outcome.OK, f"endpoint={conn.endpoint}")
            words = netclient.read_window(conn, lo, hi - lo + 1)
            self._step(
                trail, who, "nc.read", Outcome.OK, f"asset={cmd.asset_id} window=[{lo:#06x},{hi:#06x}]"
            )
        except netclient.NetClientError as exc:
            self._step(trail, who, "nc.error", Outcome.FAILED, str(exc))
            return ActivityResult(
                Status.FAILED, reason=ResultReason.NETWORK_ERROR, detail=str(exc)
            )
        finally:
            if conn is not None:
                netclient.disconnect(conn)
                self._step(trail, who, "nc.disconnect", Outcome.OK)

        def confidential(addr: int) -> bool:
            return any(a <= addr <= b for a, b in confidential_ranges)

        snapshot = {lo + i: w for i, w in enumerate(words)}
        split = {
            Category.CONFIDENTIAL: {a: w for a, w in snapshot.items() if confidential(a)},
            Category.NON_CONFIDENTIAL: {a: w for a, w in snapshot.items() if not confidential(a)},
        }
        captured_at = self.clock.now_ms()
        persisted = []
        try:
            for category in (Category.CONFIDENTIAL, Category.NON_CONFIDENTIAL):
                part = split[category]
                if not part:
                    continue
                rec = self.records.put_record(cmd.asset_id, category, part, captured_at)
                persisted.append(rec)
                self._step(
                    trail, who, "dc.put_record", Outcome.OK,
                    f"record={rec.record_id} category={category.value} words={len(part)}",
                )
        except StorageError as exc:
            for rec in persisted:  # all-or-nothing per tick
                self.records.delete_record(rec)
            self._step(trail, who, "dc.put_record", Outcome.FAILED, str(exc))
            return ActivityResult(
                Status.FAILED, reason=ResultReason.STORAGE_ERROR, detail=str(exc)
            )
        return ActivityResult(
            Status.OK,
            payload={
                "asset_id": cmd.asset_id,
                "records": [
                    {"record_id": r.record_id, "category": r.category.value, "words": len(r.snapshot)}
                    for r in persisted
                ],
            },
        )

    # -- threat profile generation ---------------------------------------------------------

    def _run_threat_profile(
        self, cmd: ValidatedCommand, who: Principal, trail: list[int]
    ) -> ActivityResult:
        decision = self.sm.validate_key(cmd.key, who.role, who.user_id)
        self._step_decision(trail, who, "sm.validate_key", decision)
        if not decision.allowed:
            return self._denied(decision)

        now = self.clock.now_ms()
        window = (now - self.profile_window_ms, now)
        logs = read_logs(self.log_paths, window)
        self._step(
            trail, who, "dc.read_logs", Outcome.OK,
            f"window=[{window[0]},{window[1]}] records={len(logs)}",
        )
        tree = threatprofile.build_profile(logs, window)
        baselines = [
            doc["tree"] for doc in self.profiles.recent(self.baseline_profiles) if "tree" in doc
        ]
        anomalies = (
            threatprofile.detect_anomalies(tree, baselines, self.anomaly_z_threshold)
            if baselines
            else []
        )
        document = {"tree": tree, "anomalies": anomalies, "baseline_count": len(baselines)}
        try:
            profile_id = self.profiles.put(document)
        except OSError as exc:
            self._step(trail, who, "dc.put_profile", Outcome.FAILED, str(exc))
            return ActivityResult(
                Status.FAILED, reason=ResultReason.STORAGE_ERROR, detail=str(exc)
            )
        self._step(trail, who, "dc.put_profile", Outcome.OK, f"profile={profile_id}")
        return ActivityResult(
            Status.OK,
            payload={
                "profile_id": profile_id,
                "clients": len(tree["clients"]),
                "anomalies": len(anomalies),
            },
        )
