import pytest
from hypothesis import given, settings, strategies as st

from plantgate.datastore.auditlog import AuditRecord, Outcome, World
from plantgate.threatprofile import (
    NoBaseline,
    StrideElement,
    Threat,
    build_profile,
    detect_anomalies,
    serialize_profile,
    stride_map,
)

SEQ = iter(range(1, 1_000_000))


def rec(principal, activity, outcome, ts=1000, latency=None, detail=""):
    return AuditRecord(
        seq=next(SEQ),
        world=World.NW,
        ts_ms=ts,
        principal=principal,
        activity=activity,
        outcome=outcome,
        latency_ms=latency,
        detail=detail,
    )


# -- element/threat correlation matrix ------------------------------------------


def test_external_entities_row():
    assert stride_map(StrideElement.EXTERNAL_ENTITY) == {Threat.SPOOFING, Threat.REPUDIATION}


def test_processes_row_is_all_six():
    assert stride_map(StrideElement.PROCESS) == frozenset(Threat)


def test_data_flows_row():
    assert stride_map(StrideElement.DATA_FLOW) == {
        Threat.TAMPERING,
        Threat.INFORMATION_DISCLOSURE,
        Threat.DENIAL_OF_SERVICE,
    }


def test_data_stores_row():
    assert stride_map(StrideElement.DATA_STORE) == {
        Threat.TAMPERING,
        Threat.REPUDIATION,
        Threat.INFORMATION_DISCLOSURE,
        Threat.DENIAL_OF_SERVICE,
    }


# -- profile building --------------------------------------------------------------


def test_failure_rate_over_fixture():
    records = (
        [rec("a", "read", Outcome.OK, latency=5) for _ in range(5)]
        + [rec("a", "read", Outcome.DENIED, latency=5, detail="reason=ConfidentialOverlap")]
        + [rec("b", "write", Outcome.OK, latency=5) for _ in range(2)]
        + [rec("b", "store_s", Outcome.FAILED, latency=5, detail="reason=NetworkError")] * 2
    )
    tree = build_profile(records, (0, 2000))
    assert tree["counts"]["terminal"] == 10
    assert tree["system"]["failure_rate"] == pytest.approx(0.2)
    assert tree["system"]["availability"] == pytest.approx(0.8)


def test_average_latency_is_arithmetic_mean():
    records = [
        rec("a", "read", Outcome.OK, latency=10),
        rec("a", "read", Outcome.OK, latency=20),
        rec("a", "read", Outcome.OK, latency=30),
    ]
    tree = build_profile(records, (0, 2000))
    assert tree["system"]["avg_latency_ms"] == pytest.approx(20.0)


def test_empty_window_degenerate_profile():
    tree = build_profile([], (0, 1000))
    assert tree["clients"] == {}
    assert tree["system"] == {
        "availability": 1.0,
        "failure_rate": 0.0,
        "avg_latency_ms": 0.0,
    }


def test_steps_counted_but_not_rated():
    records = [
        rec("a", "sm.validate_key", Outcome.OK),
        rec("a", "nc.connect", Outcome.OK),
        rec("a", "read_s", Outcome.OK, latency=7),
    ]
    tree = build_profile(records, (0, 2000))
    assert tree["counts"] == {"total": 3, "terminal": 1}
    assert tree["clients"]["a"]["steps"] == 2
    assert tree["clients"]["a"]["activities"]["read_s"]["count"] == 1


def test_denial_reason_histogram():
    records = [
        rec("a", "read", Outcome.DENIED, detail="reason=ConfidentialOverlap addr=0x0100"),
        rec("a", "read", Outcome.DENIED, detail="reason=ConfidentialOverlap addr=0x01ff"),
        rec("a", "read", Outcome.DENIED, detail="reason=OutOfRange addr=0x0400"),
    ]
    tree = build_profile(records, (0, 2000))
    leaf = tree["clients"]["a"]["activities"]["read"]
    assert leaf["denial_reasons"] == {"ConfidentialOverlap": 2, "OutOfRange": 1}


def test_window_filtering():
    records = [rec("a", "read", Outcome.OK, ts=100), rec("a", "read", Outcome.OK, ts=9000)]
    tree = build_profile(records, (0, 1000))
    assert tree["counts"]["terminal"] == 1


def test_serialization_deterministic():
    records = [
        rec("b", "write", Outcome.OK, latency=3),
        rec("a", "read", Outcome.OK, latency=4),
    ]
    t1 = build_profile(records, (0, 2000))
    t2 = build_profile(list(records), (0, 2000))
    assert serialize_profile(t1) == serialize_profile(t2)


outcomes_st = st.sampled_from(list(Outcome))
activities_st = st.sampled_from(["read", "write", "store_s", "sm.validate_key", "nc.read"])


@settings(max_examples=100)
@given(
    st.lists(
        st.tuples(st.sampled_from(["a", "b", "c"]), activities_st, outcomes_st),
        max_size=50,
    )
)
def test_count_conservation(items):
    records = [rec(p, act, out, ts=500) for p, act, out in items]
    tree = build_profile(records, (0, 1000))
    leaf_total = sum(
        leaf["count"]
        for client in tree["clients"].values()
        for leaf in client["activities"].values()
    )
    assert leaf_total == tree["counts"]["terminal"]
    assert leaf_total == sum(1 for r in records if r.activity in ("read", "write", "store_s"))


# -- anomaly detection ----------------------------------------------------------------


def quiet_tree(denied=0, count=10):
    records = [rec("a", "read", Outcome.OK) for _ in range(count - denied)] + [
        rec("a", "read", Outcome.DENIED, detail="reason=ConfidentialOverlap")
        for _ in range(denied)
    ]
    return build_profile(records, (0, 2000))


def test_denial_burst_flagged_against_quiet_baseline():
    baselines = [quiet_tree(denied=0) for _ in range(5)]
    current = quiet_tree(denied=10, count=20)
    flags = detect_anomalies(current, baselines)
    assert any(
        f["node"] == "clients/a/activities/read" and f["metric"] == "denied_rate"
        for f in flags
    )
    flag = [f for f in flags if f["metric"] == "denied_rate"][0]
    assert flag["element"] == "external_entity"
    assert flag["threats"] == ["repudiation", "spoofing"]


def test_identical_current_and_baseline_no_flags():
    baseline = quiet_tree(denied=2)
    assert detect_anomalies(quiet_tree(denied=2), [baseline, quiet_tree(denied=2)]) == []


def test_single_baseline_zero_spread_flags_any_new_denial():
    baselines = [quiet_tree(denied=0)]
    current = quiet_tree(denied=1)
    flags = detect_anomalies(current, baselines)
    assert len(flags) == 1
    assert flags[0]["metric"] == "denied_rate"
    assert flags[0]["score"] == pytest.approx(0.1)


def test_failed_rate_uses_activity_element():
    def failing_tree(failed):
        records = [rec("s", "store_s", Outcome.OK) for _ in range(10 - failed)] + [
            rec("s", "store_s", Outcome.FAILED, detail="reason=StorageError")
            for _ in range(failed)
        ]
        return build_profile(records, (0, 2000))

    flags = detect_anomalies(failing_tree(5), [failing_tree(0)])
    assert flags[0]["element"] == "data_store"


def test_no_baseline_is_an_error():
    with pytest.raises(NoBaseline):
        detect_anomalies(quiet_tree(), [])


def test_z_score_hand_computed():
    # Baseline denied rates: 0.0, 0.0, 0.1, 0.1 -> mean 0.05, pstdev 0.05.
    baselines = [quiet_tree(denied=0), quiet_tree(denied=0), quiet_tree(denied=1), quiet_tree(denied=1)]
    current = quiet_tree(denied=3)  # rate 0.3 -> z = (0.3 - 0.05) / 0.05 = 5.0
    flags = detect_anomalies(current, baselines, z_threshold=3.0)
    denied_flags = [f for f in flags if f["metric"] == "denied_rate"]
    assert len(denied_flags) == 1
    assert denied_flags[0]["score"] == pytest.approx(5.0)
    # Threshold above the z-score suppresses the flag.
    assert detect_anomalies(current, baselines, z_threshold=6.0) == []
