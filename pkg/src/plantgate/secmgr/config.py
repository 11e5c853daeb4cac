"""Secure-world process configuration.

Loaded by the SW process from its own file at startup; never writable from the
normal world. Holds asset policies, role keys, the mode flag and storage paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from plantgate.common import Role
from plantgate.secmgr.engine import PolicyEngine
from plantgate.secmgr.trustapp import SecurityManagerTA
from plantgate.secmgr.types import AssetPolicy
from plantgate.worldlink.server import SecureWorldServer
from plantgate.worldlink.types import DEFAULT_HASH_ALGO, Mode


@dataclass
class SecureWorldConfig:
    endpoint: str
    mode: Mode
    storage_dir: Path
    assets: list[AssetPolicy] = field(default_factory=list)
    role_keys: dict[Role, bytes] = field(default_factory=dict)
    measurement_hash: str = DEFAULT_HASH_ALGO

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path = Path(".")) -> "SecureWorldConfig":
        assets = [
            AssetPolicy(
                asset_id=a["asset_id"],
                endpoint=a["endpoint"],
                register_space=tuple(a["register_space"]),
                confidential_ranges=tuple(tuple(r) for r in a.get("confidential_ranges", [])),
                device_key=bytes.fromhex(a["device_key_hex"]),
            )
            for a in obj.get("assets", [])
        ]
        role_keys = {
            Role(name): bytes.fromhex(hexkey)
            for name, hexkey in obj.get("role_keys", {}).items()
        }
        storage_dir = Path(obj["storage_dir"])
        if not storage_dir.is_absolute():
            storage_dir = base_dir / storage_dir
        return cls(
            endpoint=obj["endpoint"],
            mode=Mode(obj.get("mode", "normal")),
            storage_dir=storage_dir,
            assets=assets,
            role_keys=role_keys,
            measurement_hash=obj.get("measurement_hash", DEFAULT_HASH_ALGO),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SecureWorldConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def build_server(cfg: SecureWorldConfig) -> SecureWorldServer:
    server = SecureWorldServer(
        endpoint=cfg.endpoint,
        mode=cfg.mode,
        storage_dir=cfg.storage_dir,
        apps=[],
        hash_algo=cfg.measurement_hash,
    )
    engine = PolicyEngine(
        assets={a.asset_id: a for a in cfg.assets},
        role_keys=cfg.role_keys,
        storage_dir=cfg.storage_dir,
        audit=server.audit,
    )
    ta = SecurityManagerTA(engine)
    server.apps[ta.ta_id] = ta
    server.create_calls[ta.ta_id] = 0
    return server
