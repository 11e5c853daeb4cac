"""Tree-structured threat profiles over chronicle-log windows.

A profile has a root carrying window metadata and log counts, one node per
distinct client with per-command leaf statistics, and a system node with
service availability, average request latency and failure rate. Terminal
records (activity is a command kind) drive the rate statistics; step records
are excluded from rates but counted per client.

Anomaly flags compare a profile against baseline profiles with a z-score rule
and are tagged with the element/threat correlation matrix.
"""

from __future__ import annotations

import json
import re
from enum import Enum
from statistics import fmean, pstdev
from typing import Iterable, Optional

from plantgate.cmdparse import CommandKind
from plantgate.datastore.auditlog import AuditRecord, Outcome

COMMAND_KINDS = tuple(kind.value for kind in CommandKind)

DEFAULT_Z_THRESHOLD = 3.0

_REASON_RE = re.compile(r"reason=([A-Za-z]+)")


class StrideElement(Enum):
    EXTERNAL_ENTITY = "external_entity"
    PROCESS = "process"
    DATA_FLOW = "data_flow"
    DATA_STORE = "data_store"


class Threat(Enum):
    SPOOFING = "spoofing"
    TAMPERING = "tampering"
    REPUDIATION = "repudiation"
    INFORMATION_DISCLOSURE = "information_disclosure"
    DENIAL_OF_SERVICE = "denial_of_service"
    ELEVATION_OF_PRIVILEGE = "elevation_of_privilege"


STRIDE_MATRIX: dict[StrideElement, frozenset[Threat]] = {
    StrideElement.EXTERNAL_ENTITY: frozenset({Threat.SPOOFING, Threat.REPUDIATION}),
    StrideElement.PROCESS: frozenset(Threat),
    StrideElement.DATA_FLOW: frozenset(
        {Threat.TAMPERING, Threat.INFORMATION_DISCLOSURE, Threat.DENIAL_OF_SERVICE}
    ),
    StrideElement.DATA_STORE: frozenset(
        {
            Threat.TAMPERING,
            Threat.REPUDIATION,
            Threat.INFORMATION_DISCLOSURE,
            Threat.DENIAL_OF_SERVICE,
        }
    ),
}


def stride_map(element: StrideElement) -> frozenset[Threat]:
    return STRIDE_MATRIX[element]


class NoBaseline(Exception):
    pass


def is_terminal(record: AuditRecord) -> bool:
    return record.activity in COMMAND_KINDS


def build_profile(
    records: Iterable[AuditRecord], window: tuple[int, int]
) -> dict:
    """Deterministic profile tree over the records inside the window.

    With no requests in the window the tree degenerates to root plus the
    system node: availability 1.0, failure rate 0.0 (absence of requests is
    not an outage).
    """
    lo, hi = window
    in_window = [r for r in records if lo <= r.ts_ms <= hi]
    terminal = [r for r in in_window if is_terminal(r)]

    clients: dict = {}
    for rec in in_window:
        client = clients.setdefault(rec.principal, {"steps": 0, "activities": {}})
        if not is_terminal(rec):
            client["steps"] += 1
            continue
        leaf = client["activities"].setdefault(
            rec.activity,
            {
                "count": 0,
                "ok": 0,
                "denied": 0,
                "failed": 0,
                "denial_reasons": {},
                "latency_mean_ms": 0.0,
                "latency_max_ms": 0,
                "_latencies": [],
            },
        )
        leaf["count"] += 1
        if rec.outcome is Outcome.OK:
            leaf["ok"] += 1
        elif rec.outcome is Outcome.DENIED:
            leaf["denied"] += 1
            reason = _REASON_RE.search(rec.detail)
            if reason:
                name = reason.group(1)
                leaf["denial_reasons"][name] = leaf["denial_reasons"].get(name, 0) + 1
        else:
            leaf["failed"] += 1
        if rec.latency_ms is not None:
            leaf["_latencies"].append(rec.latency_ms)

    for client in clients.values():
        for leaf in client["activities"].values():
            latencies = leaf.pop("_latencies")
            if latencies:
                leaf["latency_mean_ms"] = fmean(latencies)
                leaf["latency_max_ms"] = max(latencies)

    total_terminal = len(terminal)
    if total_terminal:
        ok = sum(1 for r in terminal if r.outcome is Outcome.OK)
        denied = sum(1 for r in terminal if r.outcome is Outcome.DENIED)
        failed = total_terminal - ok - denied
        latencies = [r.latency_ms for r in terminal if r.latency_ms is not None]
        system = {
            "availability": (ok + denied) / total_terminal,
            "failure_rate": failed / total_terminal,
            "avg_latency_ms": fmean(latencies) if latencies else 0.0,
        }
    else:
        system = {"availability": 1.0, "failure_rate": 0.0, "avg_latency_ms": 0.0}

    return {
        "window": {"from_ms": lo, "to_ms": hi},
        "counts": {"total": len(in_window), "terminal": total_terminal},
        "clients": clients,
        "system": system,
    }


def serialize_profile(tree: dict) -> str:
    """Stable-ordered document; byte-identical for identical trees."""
    return json.dumps(tree, sort_keys=True, separators=(",", ":"))


def _leaf_rates(tree: dict, principal: str, kind: str) -> tuple[float, float]:
    leaf = tree.get("clients", {}).get(principal, {}).get("activities", {}).get(kind)
    if not leaf or not leaf["count"]:
        return 0.0, 0.0
    return leaf["denied"] / leaf["count"], leaf["failed"] / leaf["count"]


# Failure anomalies point at the element the command kind exercises; denial
# anomalies point at the requesting entity.
_FAILURE_ELEMENT = {
    CommandKind.READ.value: StrideElement.DATA_FLOW,
    CommandKind.WRITE.value: StrideElement.DATA_FLOW,
    CommandKind.UPDATE.value: StrideElement.DATA_FLOW,
    CommandKind.READ_S.value: StrideElement.DATA_FLOW,
    CommandKind.WRITE_S.value: StrideElement.DATA_FLOW,
    CommandKind.STORE_S.value: StrideElement.DATA_STORE,
    CommandKind.GEN_THREAT_PROFILE_S.value: StrideElement.PROCESS,
}


def detect_anomalies(
    tree: dict,
    baselines: list[dict],
    z_threshold: float = DEFAULT_Z_THRESHOLD,
) -> list[dict]:
    """Flag (client, activity) leaves whose denied or failed rate exceeds
    baseline mean + z_threshold * stddev; with zero spread, any increase flags."""
    if not baselines:
        raise NoBaseline("anomaly detection needs at least one baseline profile")
    flags = []
    for principal in sorted(tree.get("clients", {})):
        activities = tree["clients"][principal].get("activities", {})
        for kind in sorted(activities):
            denied_rate, failed_rate = _leaf_rates(tree, principal, kind)
            history = [_leaf_rates(b, principal, kind) for b in baselines]
            for metric, current, element in (
                ("denied_rate", denied_rate, StrideElement.EXTERNAL_ENTITY),
                ("failed_rate", failed_rate, _FAILURE_ELEMENT.get(kind, StrideElement.PROCESS)),
            ):
                values = [h[0] if metric == "denied_rate" else h[1] for h in history]
                mean = fmean(values)
                spread = pstdev(values) if len(values) > 1 else 0.0
                if spread > 0:
                    score = (current - mean) / spread
                    flagged = score > z_threshold
                else:
                    score = current - mean
                    flagged = score > 0
                if flagged:
                    flags.append(
                        {
                            "node": f"clients/{principal}/activities/{kind}",
                            "metric": metric,
                            "score": score,
                            "element": element.value,
                            "threats": sorted(t.value for t in stride_map(element)),
                        }
                    )
    return flags
