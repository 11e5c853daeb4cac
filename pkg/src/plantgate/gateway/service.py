"""Gateway process composition: config, world session, stores, HTTP server."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from plantgate import worldlink
from plantgate.actmgr import ActivityManager, PeriodicScheduler
from plantgate.clock import Clock, SYSTEM_CLOCK
from plantgate.datastore import AuditLog, ProfileStore, RecordStore, World
from plantgate.gateway.app import DEFAULT_FIRMWARE_CAP, GatewayApp
from plantgate.gateway.http import GatewayHTTPServer, make_http_server
from plantgate.gateway.tokens import DEFAULT_TTL_S, TokenTable
from plantgate.gateway.users import UserFile
from plantgate.secmgr import TA_ID, SecureManagerClient


@dataclass
class GatewayConfig:
    sw_endpoint: str
    image_path: Path
    data_dir: Path
    user_file: Path
    assets: dict[int, str] = field(default_factory=dict)
    listen_host: str = "127.0.0.1"
    listen_port: int = 8440
    ta_id: str = TA_ID
    sw_audit_log: Optional[Path] = None
    token_ttl_s: int = DEFAULT_TTL_S
    firmware_max_bytes: int = DEFAULT_FIRMWARE_CAP
    profile_window_ms: int = 3_600_000
    connect_timeout: float = 2.0
    scheduler_key: Optional[bytes] = None
    store_interval_s: float = 60.0
    profile_interval_s: float = 300.0

    @classmethod
    def load(cls, path: str | Path) -> "GatewayConfig":
        path = Path(path)
        obj = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def _path(name):
            p = Path(obj[name])
            return p if p.is_absolute() else base / p

        return cls(
            sw_endpoint=obj["sw_endpoint"],
            image_path=_path("image_path"),
            data_dir=_path("data_dir"),
            user_file=_path("user_file"),
            assets={int(k): v for k, v in obj.get("assets", {}).items()},
            listen_host=obj.get("listen_host", "127.0.0.1"),
            listen_port=obj.get("listen_port", 8440),
            ta_id=obj.get("ta_id", TA_ID),
            sw_audit_log=Path(obj["sw_audit_log"]) if obj.get("sw_audit_log") else None,
            token_ttl_s=obj.get("token_ttl_s", DEFAULT_TTL_S),
            firmware_max_bytes=obj.get("firmware_max_bytes", DEFAULT_FIRMWARE_CAP),
            profile_window_ms=obj.get("profile_window_ms", 3_600_000),
            connect_timeout=obj.get("connect_timeout", 2.0),
            scheduler_key=(
                bytes.fromhex(obj["scheduler_key_hex"]) if obj.get("scheduler_key_hex") else None
            ),
            store_interval_s=obj.get("store_interval_s", 60.0),
            profile_interval_s=obj.get("profile_interval_s", 300.0),
        )


class GatewayService:
    """Owns the world session and every normal-world component of one gateway."""

    def __init__(self, config: GatewayConfig, clock: Clock = SYSTEM_CLOCK):
        self.config = config
        self.clock = clock
        self.ctx = None
        self.session = None
        self.scheduler: Optional[PeriodicScheduler] = None
        self.httpd: Optional[GatewayHTTPServer] = None
        self._http_thread: Optional[threading.Thread] = None
        self.app: Optional[GatewayApp] = None

    def start(self) -> "GatewayService":
        cfg = self.config
        cfg.data_dir.mkdir(parents=True, exist_ok=True)

        self.ctx = worldlink.initialize_context(cfg.sw_endpoint)
        self.session = worldlink.open_session(self.ctx, cfg.ta_id, str(cfg.image_path))
        sm = SecureManagerClient(self.session)

        storage_key = sm.issue_storage_key()
        records = RecordStore(cfg.data_dir / "store", storage_key, self.clock)
        profiles = ProfileStore(cfg.data_dir / "profiles")
        audit = AuditLog(cfg.data_dir / "nw_audit.log", World.NW, self.clock)
        log_paths = [audit.path]
        if cfg.sw_audit_log is not None:
            log_paths.append(cfg.sw_audit_log)

        am = ActivityManager(
            sm=sm,
            asset_endpoints=cfg.assets,
            records=records,
            profiles=profiles,
            audit=audit,
            log_paths=log_paths,
            staging_dir=cfg.data_dir / "staging",
            clock=self.clock,
            profile_window_ms=cfg.profile_window_ms,
            connect_timeout=cfg.connect_timeout,
        )
        self.app = GatewayApp(
            users=UserFile.load(cfg.user_file),
            tokens=TokenTable(cfg.token_ttl_s, self.clock),
            am=am,
            records=records,
            profiles=profiles,
            audit=audit,
            staging_dir=cfg.data_dir / "staging",
            clock=self.clock,
            firmware_max_bytes=cfg.firmware_max_bytes,
        )
        if cfg.scheduler_key is not None:
            self.scheduler = PeriodicScheduler(
                am.dispatch,
                asset_ids=sorted(cfg.assets),
                scheduler_key=cfg.scheduler_key,
                store_interval_s=cfg.store_interval_s,
                profile_interval_s=cfg.profile_interval_s,
            ).start()

        self.httpd = make_http_server(self.app, cfg.listen_host, cfg.listen_port)
        self._http_thread = threading.Thread(
            target=self.httpd.serve_forever, daemon=True, name="gateway-http"
        )
        self._http_thread.start()
        return self

    @property
    def base_url(self) -> str:
        return f"http://{self.httpd.endpoint}"

    def stop(self) -> None:
        if self.scheduler is not None:
            self.scheduler.stop()
        if self.httpd is not None:
            self.httpd.shutdown()
            self.httpd.server_close()
        if self._http_thread is not None:
            self._http_thread.join(timeout=5.0)
        if self.session is not None:
            try:
                worldlink.close_session(self.session)
                worldlink.finalize_context(self.ctx)
            except worldlink.WorldLinkError:
                pass
