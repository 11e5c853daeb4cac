"""One-call assembly of a complete local stack for tests and demos.

Builds a simulated fleet, a secure-world server (in-thread) with policies and
role keys, an attested world session, stores and the activity manager, and
optionally the HTTP gateway on an ephemeral port. Returns handles to
everything, including test backdoors (peek/poke, role keys).
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import threading

from plantgate import worldlink
from plantgate.actmgr import ActivityManager, Principal
from plantgate.clock import Clock, SYSTEM_CLOCK
from plantgate.common import Role
from plantgate.datastore import AuditLog, ProfileStore, RecordStore, World
from plantgate.gateway import GatewayApp, TokenTable, UserFile, make_http_server, make_user
from plantgate.secmgr import SecureWorldConfig, SecureManagerClient, TA_ID, build_server
from plantgate.plcsim import AssetServer, SimAsset, SimAssetConfig
from plantgate.worldlink import Mode
from plantgate.worldlink.measure import measure_image


@dataclass
class AssetSpec:
    asset_id: int
    register_space: tuple[int, int] = (0x0000, 0x03FF)
    confidential_ranges: tuple[tuple[int, int], ...] = ((0x0100, 0x01FF),)
    preload: dict[int, int] = field(default_factory=dict)
    illegal_ranges: tuple[tuple[int, int], ...] = ()


DEFAULT_ASSETS = [
    AssetSpec(asset_id=1),
    AssetSpec(asset_id=2, confidential_ranges=((0x0200, 0x02FF),)),
]


@dataclass
class DevStack:
    base_dir: Path
    fleet: dict[int, AssetServer]
    sw_server: object
    ctx: object
    session: object
    sm: SecureManagerClient
    records: RecordStore
    profiles: ProfileStore
    nw_audit: AuditLog
    am: ActivityManager
    role_keys: dict[Role, bytes]
    image_path: Path
    staging_dir: Path
    sw_audit_path: Path
    gateway_app: Optional[GatewayApp] = None
    http_server: object = None
    _http_thread: object = None
    passwords: dict[str, str] = field(default_factory=dict)

    @property
    def partner(self) -> Principal:
        return Principal("partner-1", Role.THIRD_PARTY)

    @property
    def engineer(self) -> Principal:
        return Principal("engineer-1", Role.ENGINEER)

    @property
    def admin(self) -> Principal:
        return Principal("admin-1", Role.ADMINISTRATOR)

    @property
    def scheduler(self) -> Principal:
        return Principal("scheduler", Role.SCHEDULER)

    def asset(self, asset_id: int) -> SimAsset:
        return self.fleet[asset_id].asset

    def key_for(self, role: Role) -> bytes:
        return self.role_keys[role]

    @property
    def base_url(self) -> str:
        if self.http_server is None:
            raise RuntimeError("stack was built without a gateway")
        return f"http://{self.http_server.endpoint}"

    def stop(self) -> None:
        if self.http_server is not None:
            self.http_server.shutdown()
            self.http_server.server_close()
            self._http_thread.join(timeout=5.0)
        try:
            worldlink.close_session(self.session)
            worldlink.finalize_context(self.ctx)
        except worldlink.WorldLinkError:
            pass
        self.sw_server.stop()
        for server in self.fleet.values():
            server.stop()


DEFAULT_PASSWORDS = {
    "partner-1": "partner-pass",
    "engineer-1": "engineer-pass",
    "admin-1": "admin-pass",
}

_USER_ROLES = {
    "partner-1": Role.THIRD_PARTY,
    "engineer-1": Role.ENGINEER,
    "admin-1": Role.ADMINISTRATOR,
}


def build_stack(
    base_dir: str | Path,
    assets: Optional[list[AssetSpec]] = None,
    clock: Clock = SYSTEM_CLOCK,
    profile_window_ms: int = 3_600_000,
    connect_timeout: float = 2.0,
    with_gateway: bool = False,
    token_ttl_s: int = 3600,
    firmware_max_bytes: int = 16 * 1024 * 1024,
) -> DevStack:
    base = Path(base_dir)
    sw_dir = base / "sw"
    nw_dir = base / "nw"
    staging = nw_dir / "staging"
    for d in (sw_dir, nw_dir, staging):
        d.mkdir(parents=True, exist_ok=True)

    specs = assets if assets is not None else DEFAULT_ASSETS
    role_keys = {role: secrets.token_bytes(32) for role in Role}
    device_keys = {spec.asset_id: secrets.token_bytes(32) for spec in specs}

    fleet = {}
    for spec in specs:
        sim = SimAsset(
            SimAssetConfig(
                asset_id=spec.asset_id,
                device_key=device_keys[spec.asset_id],
                preload=dict(spec.preload),
                illegal_ranges=spec.illegal_ranges,
            )
        )
        fleet[spec.asset_id] = AssetServer(sim).start()

    # The measured normal-world image; provisioned as already trained.
    image_path = nw_dir / "gateway_image.bin"
    image_path.write_bytes(secrets.token_bytes(4096))
    measurement = measure_image(str(image_path))
    (sw_dir / "trained_hashes.json").write_text(
        json.dumps({TA_ID: {"algo": measurement.algo, "digest": measurement.digest.hex()}})
    )

    sw_cfg = SecureWorldConfig(
        endpoint="127.0.0.1:0",
        mode=Mode.NORMAL,
        storage_dir=sw_dir,
        assets=[
            _policy(spec, fleet[spec.asset_id].endpoint, device_keys[spec.asset_id])
            for spec in specs
        ],
        role_keys=role_keys,
    )
    sw_server = build_server(sw_cfg)
    sw_server.clock = clock
    sw_server.start()

    ctx = worldlink.initialize_context(sw_server.endpoint)
    session = worldlink.open_session(ctx, TA_ID, str(image_path))
    sm = SecureManagerClient(session)

    storage_key = sm.issue_storage_key()
    records = RecordStore(nw_dir / "store", storage_key, clock)
    profiles = ProfileStore(nw_dir / "profiles")
    nw_audit = AuditLog(nw_dir / "nw_audit.log", World.NW, clock)
    sw_audit_path = sw_dir / "sw_audit.log"

    am = ActivityManager(
        sm=sm,
        asset_endpoints={aid: server.endpoint for aid, server in fleet.items()},
        records=records,
        profiles=profiles,
        audit=nw_audit,
        log_paths=[nw_audit.path, sw_audit_path],
        staging_dir=staging,
        clock=clock,
        profile_window_ms=profile_window_ms,
        connect_timeout=connect_timeout,
    )

    stack = DevStack(
        base_dir=base,
        fleet=fleet,
        sw_server=sw_server,
        ctx=ctx,
        session=session,
        sm=sm,
        records=records,
        profiles=profiles,
        nw_audit=nw_audit,
        am=am,
        role_keys=role_keys,
        image_path=image_path,
        staging_dir=staging,
        sw_audit_path=sw_audit_path,
        passwords=dict(DEFAULT_PASSWORDS),
    )

    if with_gateway:
        entries = [
            make_user(user_id, _USER_ROLES[user_id], password)
            for user_id, password in stack.passwords.items()
        ]
        stack.gateway_app = GatewayApp(
            users=UserFile(entries),
            tokens=TokenTable(token_ttl_s, clock),
            am=am,
            records=records,
            profiles=profiles,
            audit=nw_audit,
            staging_dir=staging,
            clock=clock,
            firmware_max_bytes=firmware_max_bytes,
        )
        stack.http_server = make_http_server(stack.gateway_app)
        stack._http_thread = threading.Thread(
            target=stack.http_server.serve_forever, daemon=True, name="devstack-http"
        )
        stack._http_thread.start()

    return stack


def _policy(spec: AssetSpec, endpoint: str, device_key: bytes):
    from plantgate.secmgr.types import AssetPolicy

    return AssetPolicy(
        asset_id=spec.asset_id,
        endpoint=endpoint,
        register_space=spec.register_space,
        confidential_ranges=spec.confidential_ranges,
        device_key=device_key,
    )
