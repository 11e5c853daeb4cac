"""Encrypted-at-rest record store with confidential/non-confidential segregation.

Every record is one file, written atomically, holding a random 12-byte nonce
followed by the AES-256-GCM ciphertext of the record document. Plaintext never
touches disk. Confidential and non-confidential records live in disjoint file
trees:

    <root>/confidential/<asset_id>/<record_id>.bin
    <root>/non_confidential/<asset_id>/<record_id>.bin
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from plantgate.clock import Clock, SYSTEM_CLOCK
from plantgate.common import DenialReason, Privilege

NONCE_SIZE = 12
KEY_SIZE = 32


class Category(Enum):
    CONFIDENTIAL = "confidential"
    NON_CONFIDENTIAL = "non_confidential"


class StorageError(Exception):
    pass


class NoStorageKey(StorageError):
    pass


class DecryptFailure(StorageError):
    """Ciphertext failed authentication: tampering or key mismatch."""


class RecordAccessDenied(Exception):
    def __init__(self, reason: DenialReason):
        super().__init__(reason.value)
        self.reason = reason


@dataclass(frozen=True)
class StoredRecord:
    """One captured register snapshot, categorized at capture time."""

    record_id: int
    asset_id: int
    category: Category
    captured_at_ms: int
    snapshot: dict[int, int]

    def to_doc(self) -> dict:
        return {
            "record_id": self.record_id,
            "asset_id": self.asset_id,
            "category": self.category.value,
            "captured_at_ms": self.captured_at_ms,
            "segments": snapshot_to_segments(self.snapshot),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "StoredRecord":
        return cls(
            record_id=doc["record_id"],
            asset_id=doc["asset_id"],
            category=Category(doc["category"]),
            captured_at_ms=doc["captured_at_ms"],
            snapshot=segments_to_snapshot(doc["segments"]),
        )


def snapshot_to_segments(snapshot: dict[int, int]) -> list[dict]:
    """Pack an address→word map into contiguous runs of 4-hex-digit words."""
    segments: list[dict] = []
    run_start: Optional[int] = None
    run_words: list[str] = []
    prev = None
    for addr in sorted(snapshot):
        if prev is not None and addr == prev + 1:
            run_words.append(f"{snapshot[addr]:04x}")
        else:
            if run_start is not None:
                segments.append({"start": run_start, "words_hex": "".join(run_words)})
            run_start = addr
            run_words = [f"{snapshot[addr]:04x}"]
        prev = addr
    if run_start is not None:
        segments.append({"start": run_start, "words_hex": "".join(run_words)})
    return segments


def segments_to_snapshot(segments: list[dict]) -> dict[int, int]:
    snapshot: dict[int, int] = {}
    for seg in segments:
        words_hex = seg["words_hex"]
        for i in range(0, len(words_hex), 4):
            snapshot[seg["start"] + i // 4] = int(words_hex[i:i + 4], 16)
    return snapshot


def encrypt_blob(key: bytes, plaintext: bytes, aad: bytes = b"") -> bytes:
    """nonce || ciphertext+tag, fresh random nonce per call."""
    nonce = secrets.token_bytes(NONCE_SIZE)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)


def decrypt_blob(key: bytes, blob: bytes, aad: bytes = b"") -> bytes:
    if len(blob) < NONCE_SIZE + 16:
        raise DecryptFailure("blob too short to hold nonce and tag")
    try:
        return AESGCM(key).decrypt(blob[:NONCE_SIZE], blob[NONCE_SIZE:], aad)
    except InvalidTag as exc:
        raise DecryptFailure("ciphertext failed authentication") from exc


class RecordStore:
    """Record persistence under one root directory.

    Record ids are monotonically increasing and continue past the previous
    maximum after a restart.
    """

    def __init__(self, root: str | Path, key: bytes, clock: Clock = SYSTEM_CLOCK):
        if not key or len(key) != KEY_SIZE:
            raise NoStorageKey(f"need a {KEY_SIZE}-byte data-at-rest key")
        self.root = Path(root)
        self._key = key
        self._clock = clock
        self._lock = threading.Lock()
        for cat in Category:
            (self.root / cat.value).mkdir(parents=True, exist_ok=True)
        self._next_id = self._scan_max_id() + 1

    def _scan_max_id(self) -> int:
        max_id = 0
        for path in self.root.glob("*/*/*.bin"):
            try:
                max_id = max(max_id, int(path.stem))
            except ValueError:
                continue
        return max_id

    def _path(self, category: Category, asset_id: int, record_id: int) -> Path:
        return self.root / category.value / str(asset_id) / f"{record_id}.bin"

    @staticmethod
    def _aad(category: Category, asset_id: int, record_id: int) -> bytes:
        return f"{category.value}:{asset_id}:{record_id}".encode()

    def put_record(
        self,
        asset_id: int,
        category: Category,
        snapshot: dict[int, int],
        captured_at_ms: Optional[int] = None,
    ) -> StoredRecord:
        with self._lock:
            record_id = self._next_id
            self._next_id += 1
        rec = StoredRecord(
            record_id=record_id,
            asset_id=asset_id,
            category=category,
            captured_at_ms=captured_at_ms if captured_at_ms is not None else self._clock.now_ms(),
            snapshot=dict(snapshot),
        )
        plaintext = json.dumps(rec.to_doc(), sort_keys=True, separators=(",", ":")).encode()
        blob = encrypt_blob(self._key, plaintext, self._aad(category, asset_id, record_id))
        path = self._path(category, asset_id, record_id)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(blob)
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"cannot persist record {record_id}: {exc}") from exc
        return rec

    def delete_record(self, rec: StoredRecord) -> None:
        """Best-effort removal; used to roll back a partially persisted pair."""
        try:
            self._path(rec.category, rec.asset_id, rec.record_id).unlink(missing_ok=True)
        except OSError:
            pass

    def get_records(
        self,
        asset_id: Optional[int] = None,
        category: Optional[Category] = None,
        window: Optional[tuple[int, int]] = None,
        privilege: Privilege = Privilege.FULL,
    ) -> list[StoredRecord]:
        """Decrypt and return records matching the filter, id-ordered.

        Confidential records require full privilege; an explicit confidential
        request at lower privilege is refused, an open request is scoped down.
        """
        if privilege is Privilege.NON_CONFIDENTIAL_ONLY:
            if category is Category.CONFIDENTIAL:
                raise RecordAccessDenied(DenialReason.ROLE_FORBIDDEN)
            category = Category.NON_CONFIDENTIAL
        categories = [category] if category else list(Category)
        out = []
        for cat in categories:
            base = self.root / cat.value
            asset_dirs = (
                [base / str(asset_id)] if asset_id is not None else sorted(base.iterdir())
                if base.exists()
                else []
            )
            for asset_dir in asset_dirs:
                if not asset_dir.is_dir():
                    continue
                for path in sorted(asset_dir.glob("*.bin"), key=lambda p: int(p.stem)):
                    rec = self._load(cat, int(asset_dir.name), int(path.stem))
                    if window is not None and not (window[0] <= rec.captured_at_ms <= window[1]):
                        continue
                    out.append(rec)
        out.sort(key=lambda r: r.record_id)
        return out

    def _load(self, category: Category, asset_id: int, record_id: int) -> StoredRecord:
        path = self._path(category, asset_id, record_id)
        blob = path.read_bytes()
        plaintext = decrypt_blob(self._key, blob, self._aad(category, asset_id, record_id))
        return StoredRecord.from_doc(json.loads(plaintext))
