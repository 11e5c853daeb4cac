"""Injectable time source so stores, logs and schedulers are testable."""

from __future__ import annotations

import threading
import time


class Clock:
    """Wall-clock time in UTC milliseconds."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class ManualClock(Clock):
    """Deterministic clock for tests; advances only when told to."""

    def __init__(self, start_ms: int = 1_700_000_000_000):
        self._now = start_ms
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            return self._now

    def advance(self, ms: int) -> None:
        with self._lock:
            self._now += ms

    def sleep(self, seconds: float) -> None:
        self.advance(int(seconds * 1000))


SYSTEM_CLOCK = Clock()
