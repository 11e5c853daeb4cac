import time

import pytest

from plantgate.actmgr import BadInterval, PeriodicScheduler
from plantgate.common import Role
from plantgate.datastore.auditlog import AuditLog, Outcome, World
from plantgate.devstack import AssetSpec, build_stack


def test_bad_interval_rejected():
    with pytest.raises(BadInterval):
        PeriodicScheduler(lambda cmd, who: None, [1], b"\x00" * 32, store_interval_s=0)
    with pytest.raises(BadInterval):
        PeriodicScheduler(lambda cmd, who: None, [1], b"\x00" * 32, profile_interval_s=0.5)


def test_timed_run_stores_and_profiles(tmp_path):
    stack = build_stack(
        tmp_path,
        assets=[
            AssetSpec(
                asset_id=1, register_space=(0, 0x7F), confidential_ranges=((0x20, 0x2F),)
            )
        ],
    )
    try:
        scheduler = PeriodicScheduler(
            stack.am.dispatch,
            asset_ids=[1],
            scheduler_key=stack.key_for(Role.SCHEDULER),
            store_interval_s=1.0,
            profile_interval_s=2.0,
        ).start()
        time.sleep(5.0)
        scheduler.stop()
    finally:
        stack.stop()

    records = stack.records.get_records(asset_id=1)
    assert len(records) >= 4  # >= 4 store ticks in a 5 s run at 1 s interval
    assert len(stack.profiles.ids()) >= 2

    # Every periodic flow passed secure-world key validation as the scheduler.
    store_ticks = [
        r for r in stack.nw_audit.read() if r.activity == "store_s" and r.principal == "scheduler"
    ]
    sw_records = AuditLog(stack.sw_audit_path, World.SW).read()
    key_checks = [
        r
        for r in sw_records
        if r.activity == "sm.validate_key" and r.principal == "scheduler" and r.outcome is Outcome.OK
    ]
    assert len(store_ticks) >= 4
    assert len(key_checks) >= len(store_ticks)
