"""Bearer tokens mapping to principals, with expiry."""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass

from plantgate.actmgr.types import Principal
from plantgate.clock import Clock, SYSTEM_CLOCK

DEFAULT_TTL_S = 3600


@dataclass(frozen=True)
class AuthToken:
    token: str  # 32 random bytes, hex-encoded
    principal: Principal
    issued_at_ms: int
    expires_at_ms: int


class TokenTable:
    def __init__(self, ttl_s: int = DEFAULT_TTL_S, clock: Clock = SYSTEM_CLOCK):
        self.ttl_s = ttl_s
        self._clock = clock
        self._tokens: dict[str, AuthToken] = {}
        self._lock = threading.Lock()

    def issue(self, principal: Principal) -> AuthToken:
        now = self._clock.now_ms()
        token = AuthToken(
            token=secrets.token_hex(32),
            principal=principal,
            issued_at_ms=now,
            expires_at_ms=now + self.ttl_s * 1000,
        )
        with self._lock:
            self._tokens[token.token] = token
        return token

    def resolve(self, token: str) -> Principal | None:
        """The principal for a live token; expired or unknown tokens resolve to None."""
        now = self._clock.now_ms()
        with self._lock:
            entry = self._tokens.get(token)
            if entry is None:
                return None
            if now >= entry.expires_at_ms:
                del self._tokens[token]
                return None
            return entry.principal
