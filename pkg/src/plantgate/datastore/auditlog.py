"""Append-only chronicle logs.

Each world (normal, secure) keeps its own log file: one JSON object per line,
UTF-8, newline-delimited. Sequence numbers are strictly increasing per log and
survive restarts; timestamps are non-decreasing per log. The line format is a
stable interface consumed by the threat profiler.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from plantgate.clock import Clock, SYSTEM_CLOCK


class World(Enum):
    NW = "nw"
    SW = "sw"


class Outcome(Enum):
    OK = "ok"
    DENIED = "denied"
    FAILED = "failed"


@dataclass(frozen=True)
class AuditRecord:
    """One time-stamped, sequence-numbered chronicle entry.

    ``latency_ms`` is set only on terminal records (one per completed
    activity); step records leave it None. ``detail`` is free text; terminal
    denials and failures carry a ``reason=<Code>`` token there.
    """

    seq: int
    world: World
    ts_ms: int
    principal: str
    activity: str
    outcome: Outcome
    latency_ms: Optional[int] = None
    detail: str = ""

    def to_line(self) -> str:
        obj = {
            "seq": self.seq,
            "world": self.world.value,
            "ts_ms": self.ts_ms,
            "principal": self.principal,
            "activity": self.activity,
            "outcome": self.outcome.value,
            "latency_ms": self.latency_ms,
            "detail": self.detail,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "AuditRecord":
        obj = json.loads(line)
        return cls(
            seq=obj["seq"],
            world=World(obj["world"]),
            ts_ms=obj["ts_ms"],
            principal=obj["principal"],
            activity=obj["activity"],
            outcome=Outcome(obj["outcome"]),
            latency_ms=obj["latency_ms"],
            detail=obj["detail"],
        )


class AuditLog:
    """Serialized appender over one world's log file.

    On startup the existing file is scanned so sequence numbers continue past
    the previous maximum.
    """

    def __init__(self, path: str | Path, world: World, clock: Clock = SYSTEM_CLOCK):
        self.path = Path(path)
        self.world = world
        self._clock = clock
        self._lock = threading.Lock()
        self._last_seq = 0
        self._last_ts = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            for rec in self._scan():
                self._last_seq = max(self._last_seq, rec.seq)
                self._last_ts = max(self._last_ts, rec.ts_ms)

    def append(
        self,
        principal: str,
        activity: str,
        outcome: Outcome,
        latency_ms: Optional[int] = None,
        detail: str = "",
    ) -> AuditRecord:
        with self._lock:
            # Wall clock may step backwards; the log's timestamps must not.
            ts = max(self._clock.now_ms(), self._last_ts)
            self._last_seq += 1
            self._last_ts = ts
            rec = AuditRecord(
                seq=self._last_seq,
                world=self.world,
                ts_ms=ts,
                principal=principal,
                activity=activity,
                outcome=outcome,
                latency_ms=latency_ms,
                detail=detail,
            )
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(rec.to_line() + "\n")
        return rec

    def _scan(self) -> Iterable[AuditRecord]:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield AuditRecord.from_line(line)

    def read(
        self,
        window: Optional[tuple[int, int]] = None,
    ) -> list[AuditRecord]:
        """Records with ts_ms inside the inclusive window, in sequence order."""
        if not self.path.exists():
            return []
        records = sorted(self._scan(), key=lambda r: r.seq)
        if window is None:
            return records
        lo, hi = window
        return [r for r in records if lo <= r.ts_ms <= hi]


def read_logs(
    paths: Iterable[str | Path],
    window: Optional[tuple[int, int]] = None,
    world: Optional[World] = None,
) -> list[AuditRecord]:
    """Merge several log files, filtered by window and world, seq-ordered per world."""
    out: list[AuditRecord] = []
    for path in paths:
        p = Path(path)
        if not p.exists():
            continue
        with open(p, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = AuditRecord.from_line(line)
                if world is not None and rec.world is not world:
                    continue
                if window is not None and not (window[0] <= rec.ts_ms <= window[1]):
                    continue
                out.append(rec)
    out.sort(key=lambda r: (r.world.value, r.seq))
    return out
