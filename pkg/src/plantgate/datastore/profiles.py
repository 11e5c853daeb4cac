"""Persistence for generated threat-profile documents.

Profiles are stable-ordered JSON, one file per profile, named by a
monotonically increasing id. They contain behavioural statistics only, never
register data, so they are stored in the clear.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Optional


class ProfileStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._next = self._scan_max() + 1

    def _scan_max(self) -> int:
        max_id = 0
        for path in self.root.glob("p*.json"):
            try:
                max_id = max(max_id, int(path.stem[1:]))
            except ValueError:
                continue
        return max_id

    @staticmethod
    def _name(number: int) -> str:
        return f"p{number:08d}"

    def put(self, document: dict) -> str:
        with self._lock:
            number = self._next
            self._next += 1
        profile_id = self._name(number)
        document = dict(document, profile_id=profile_id)
        path = self.root / f"{profile_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(document, sort_keys=True, indent=2), encoding="utf-8")
        os.replace(tmp, path)
        return profile_id

    def get(self, profile_id: str) -> Optional[dict]:
        path = self.root / f"{profile_id}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("p*.json"))

    def latest(self) -> Optional[dict]:
        ids = self.ids()
        return self.get(ids[-1]) if ids else None

    def recent(self, n: int, before_latest: bool = False) -> list[dict]:
        """The most recent n documents, oldest first; optionally excluding the latest."""
        ids = self.ids()
        if before_latest:
            ids = ids[:-1]
        return [self.get(i) for i in ids[-n:]]
