"""Security manager: address policy, key validation, proof verification, SW chronicle."""

from plantgate.secmgr.client import SecureManagerClient
from plantgate.secmgr.config import SecureWorldConfig, build_server
from plantgate.secmgr.engine import PolicyEngine
from plantgate.secmgr.trustapp import SecurityManagerTA, TA_ID
from plantgate.secmgr.types import AssetPolicy, PolicyError, StorageFull, UnknownAsset, ZeroLength

__all__ = [
    "SecureManagerClient",
    "SecureWorldConfig",
    "build_server",
    "PolicyEngine",
    "SecurityManagerTA",
    "TA_ID",
    "AssetPolicy",
    "PolicyError",
    "StorageFull",
    "UnknownAsset",
    "ZeroLength",
]
