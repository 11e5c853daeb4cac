"""Policy data carried by the secure world."""

from __future__ import annotations

from dataclasses import dataclass

DEVICE_KEY_SIZE = 32
ROLE_KEY_SIZE = 32


class PolicyError(Exception):
    pass


class UnknownAsset(PolicyError):
    wire_code = "UnknownAsset"


class ZeroLength(PolicyError):
    wire_code = "ZeroLength"


class StorageFull(PolicyError):
    wire_code = "StorageFull"


@dataclass(frozen=True)
class AssetPolicy:
    """Per-asset register metadata and the shared device secret.

    ``register_space`` and every range in ``confidential_ranges`` are inclusive
    address intervals; confidential ranges lie inside the register space and
    are pairwise disjoint.
    """

    asset_id: int
    endpoint: str
    register_space: tuple[int, int]
    confidential_ranges: tuple[tuple[int, int], ...]
    device_key: bytes

    def __post_init__(self):
        if self.asset_id < 1:
            raise ValueError("asset_id must be positive")
        lo, hi = self.register_space
        if not (0 <= lo <= hi <= 0xFFFF):
            raise ValueError(f"bad register space [{lo:#06x}, {hi:#06x}]")
        ranges = sorted(self.confidential_ranges)
        prev_hi = None
        for a, b in ranges:
            if a > b:
                raise ValueError(f"bad confidential range [{a:#06x}, {b:#06x}]")
            if a < lo or b > hi:
                raise ValueError("confidential range outside register space")
            if prev_hi is not None and a <= prev_hi:
                raise ValueError("confidential ranges overlap")
            prev_hi = b
        if len(self.device_key) != DEVICE_KEY_SIZE:
            raise ValueError(f"device key must be {DEVICE_KEY_SIZE} bytes")

    def is_confidential(self, addr: int) -> bool:
        return any(a <= addr <= b for a, b in self.confidential_ranges)
