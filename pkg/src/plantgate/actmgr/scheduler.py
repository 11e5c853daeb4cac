"""Periodic activities: record storing per asset and threat-profile generation.

Every tick flows through the normal dispatch entry point with the scheduler
principal and its own role key, so periodic flows pass the same secure-world
key validation as human-initiated ones.
"""

from __future__ import annotations

import threading
from typing import Callable

from plantgate.actmgr.types import ActivityResult, Principal
from plantgate.cmdparse import CommandKind, ValidatedCommand
from plantgate.common import Role

MIN_INTERVAL_S = 1.0


class BadInterval(ValueError):
    pass


class PeriodicScheduler:
    def __init__(
        self,
        dispatch: Callable[[ValidatedCommand, Principal], ActivityResult],
        asset_ids: list[int],
        scheduler_key: bytes,
        store_interval_s: float = 60.0,
        profile_interval_s: float = 300.0,
        user_id: str = "scheduler",
    ):
        if store_interval_s < MIN_INTERVAL_S or profile_interval_s < MIN_INTERVAL_S:
            raise BadInterval(f"intervals must be at least {MIN_INTERVAL_S} s")
        self._dispatch = dispatch
        self.asset_ids = list(asset_ids)
        self._key = scheduler_key
        self.store_interval_s = store_interval_s
        self.profile_interval_s = profile_interval_s
        self.principal = Principal(user_id, Role.SCHEDULER)
        self.store_ticks = 0
        self.profile_ticks = 0
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> "PeriodicScheduler":
        for name, target in (("store", self._store_loop), ("profile", self._profile_loop)):
            thread = threading.Thread(target=target, daemon=True, name=f"scheduler-{name}")
            thread.start()
            self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=5.0)

    def _store_loop(self) -> None:
        while not self._stop.is_set():
            for asset_id in self.asset_ids:
                cmd = ValidatedCommand(CommandKind.STORE_S, key=self._key, asset_id=asset_id)
                self._safe_dispatch(cmd)
            self.store_ticks += 1
            self._stop.wait(self.store_interval_s)

    def _profile_loop(self) -> None:
        while not self._stop.is_set():
            cmd = ValidatedCommand(CommandKind.GEN_THREAT_PROFILE_S, key=self._key)
            self._safe_dispatch(cmd)
            self.profile_ticks += 1
            self._stop.wait(self.profile_interval_s)

    def _safe_dispatch(self, cmd: ValidatedCommand) -> None:
        try:
            self._dispatch(cmd, self.principal)
        except Exception:
            # A failed tick is already audited; the schedule must survive it.
            pass
