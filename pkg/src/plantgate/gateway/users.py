"""User file: salted credential hashes, provisioned offline."""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
from dataclasses import dataclass
from pathlib import Path

from plantgate.common import Role

DEFAULT_ITERATIONS = 100_000


@dataclass(frozen=True)
class UserEntry:
    user_id: str
    role: Role
    salt: bytes
    credential_hash: bytes
    iterations: int

    def verify(self, credential: str) -> bool:
        candidate = hashlib.pbkdf2_hmac(
            "sha256", credential.encode("utf-8"), self.salt, self.iterations
        )
        return hmac.compare_digest(candidate, self.credential_hash)


def make_user(user_id: str, role: Role, credential: str, iterations: int = DEFAULT_ITERATIONS) -> UserEntry:
    salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", credential.encode("utf-8"), salt, iterations)
    return UserEntry(user_id, role, salt, digest, iterations)


class UserFile:
    def __init__(self, entries: list[UserEntry]):
        self._users = {e.user_id: e for e in entries}
        # A decoy entry keeps unknown-user verification on the same code path.
        self._decoy = make_user("", Role.THIRD_PARTY, secrets.token_hex(16))

    def authenticate(self, user_id: str, credential: str) -> UserEntry | None:
        """The failure answer is identical for unknown users and bad credentials."""
        entry = self._users.get(user_id)
        if entry is None:
            self._decoy.verify(credential)
            return None
        return entry if entry.verify(credential) else None

    @classmethod
    def load(cls, path: str | Path) -> "UserFile":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = [
            UserEntry(
                user_id=u["user_id"],
                role=Role(u["role"]),
                salt=bytes.fromhex(u["salt_hex"]),
                credential_hash=bytes.fromhex(u["hash_hex"]),
                iterations=u["iterations"],
            )
            for u in obj["users"]
        ]
        return cls(entries)


def write_user_file(path: str | Path, entries: list[UserEntry]) -> None:
    obj = {
        "users": [
            {
                "user_id": e.user_id,
                "role": e.role.value,
                "salt_hex": e.salt.hex(),
                "hash_hex": e.credential_hash.hex(),
                "iterations": e.iterations,
            }
            for e in entries
        ]
    }
    Path(path).write_text(json.dumps(obj, indent=2), encoding="utf-8")
