import hashlib
import json
import secrets

import pytest
import requests

from plantgate.common import Role
from plantgate.devstack import build_stack


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    st = build_stack(tmp_path_factory.mktemp("gw"), with_gateway=True)
    yield st
    st.stop()


def login(stack, user_id, password=None):
    password = password if password is not None else stack.passwords[user_id]
    resp = requests.post(
        f"{stack.base_url}/api/v1/auth/login",
        json={"user_id": user_id, "credential": password},
        timeout=5,
    )
    return resp


def token_headers(stack, user_id):
    token = login(stack, user_id).json()["token"]
    return {"Authorization": f"Bearer {token}"}


def submit(stack, headers, line):
    return requests.post(
        f"{stack.base_url}/api/v1/command", json={"command": line}, headers=headers, timeout=5
    )


# -- health and auth ----------------------------------------------------------------


def test_health(stack):
    resp = requests.get(f"{stack.base_url}/api/v1/health", timeout=5)
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_login_returns_role_and_expiry(stack):
    resp = login(stack, "engineer-1")
    assert resp.status_code == 200
    body = resp.json()
    assert body["role"] == "engineer"
    assert len(body["token"]) == 64
    assert body["expires_at_ms"] > 0


def test_wrong_password_and_unknown_user_identical(stack):
    wrong = login(stack, "engineer-1", "nope")
    unknown = login(stack, "ghost", "nope")
    assert wrong.status_code == unknown.status_code == 401
    assert wrong.content == unknown.content  # byte-identical, no existence leak


def test_bad_token_rejected(stack):
    headers = {"Authorization": f"Bearer {secrets.token_hex(32)}"}
    resp = submit(stack, headers, "read 1 0x0010 1")
    assert resp.status_code == 401
    assert resp.json() == {"error": "InvalidToken"}


def test_no_side_effects_on_bad_token(stack):
    frames_before = stack.asset(1).frames_handled
    headers = {"Authorization": "Bearer deadbeef"}
    assert submit(stack, headers, "read 1 0x0010 1").status_code == 401
    assert stack.asset(1).frames_handled == frames_before


def test_token_expiry(tmp_path):
    from plantgate.clock import ManualClock

    # Manual clock: the token expires the instant the clock passes its TTL.
    clock = ManualClock()
    local = build_stack(tmp_path, with_gateway=True, token_ttl_s=10, clock=clock)
    try:
        headers = token_headers(local, "partner-1")
        assert submit(local, headers, "read 1 0x0010 1").status_code == 200
        clock.advance(11_000)
        assert submit(local, headers, "read 1 0x0010 1").status_code == 401
    finally:
        local.stop()


# -- command bridge ----------------------------------------------------------------------


def test_partner_read_renders_hex_words(stack):
    stack.asset(1).poke(0x0010, [0xBEEF, 0x0001])
    headers = token_headers(stack, "partner-1")
    resp = submit(stack, headers, "read 1 0x0010 2")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["payload"]["words"] == ["0xbeef", "0x0001"]


def test_engineer_confidential_read(stack):
    stack.asset(1).poke(0x0100, [0x5A5A])
    headers = token_headers(stack, "engineer-1")
    key = stack.key_for(Role.ENGINEER).hex()
    resp = submit(stack, headers, f"read_s {key} 1 0x0100 1")
    assert resp.status_code == 200
    assert resp.json()["payload"]["words"] == ["0x5a5a"]


def test_role_violation_maps_to_403(stack):
    headers = token_headers(stack, "partner-1")
    key = stack.key_for(Role.ENGINEER).hex()
    resp = submit(stack, headers, f"read_s {key} 1 0x0100 1")
    assert resp.status_code == 403
    assert resp.json()["reason"] == "RoleForbidden"


def test_parse_error_maps_to_400(stack):
    headers = token_headers(stack, "partner-1")
    resp = submit(stack, headers, "read 1 zz 4")
    assert resp.status_code == 400
    assert resp.json()["error"] == "BadNumber"


def test_network_failure_maps_to_502(tmp_path):
    local = build_stack(tmp_path, with_gateway=True, connect_timeout=0.5)
    try:
        local.fleet[1].stop()
        headers = token_headers(local, "partner-1")
        resp = submit(local, headers, "read 1 0x0010 1")
        assert resp.status_code == 502
        assert resp.json()["reason"] == "NetworkError"
    finally:
        local.stop()


# -- firmware upload ---------------------------------------------------------------------


def upload(stack, headers, name, data):
    return requests.post(
        f"{stack.base_url}/api/v1/firmware/{name}", data=data, headers=headers, timeout=5
    )


def test_upload_then_update(stack):
    image = secrets.token_bytes(2048)
    headers = token_headers(stack, "partner-1")
    resp = upload(stack, headers, "unit9.bin", image)
    assert resp.status_code == 201
    assert resp.json()["sha256"] == hashlib.sha256(image).hexdigest()
    resp = submit(stack, headers, "update 1 unit9.bin")
    assert resp.status_code == 200
    assert resp.json()["payload"]["digest"] == hashlib.sha256(image).hexdigest()


def test_upload_traversal_name_rejected(stack):
    headers = token_headers(stack, "engineer-1")
    resp = requests.post(
        f"{stack.base_url}/api/v1/firmware/..%2fescape.bin", data=b"x", headers=headers, timeout=5
    )
    assert resp.status_code == 400
    assert resp.json() == {"error": "BadName"}


def test_upload_too_large(tmp_path):
    local = build_stack(tmp_path, with_gateway=True, firmware_max_bytes=1024)
    try:
        headers = token_headers(local, "partner-1")
        resp = upload(local, headers, "big.bin", bytes(2048))
        assert resp.status_code == 413
    finally:
        local.stop()


def test_upload_role_gate(stack):
    headers = token_headers(stack, "admin-1")
    assert upload(stack, headers, "nope.bin", b"x").status_code == 403


# -- records ----------------------------------------------------------------------------------


def seed_records(stack):
    headers = token_headers(stack, "engineer-1")
    key = stack.key_for(Role.ENGINEER).hex()
    assert submit(stack, headers, f"store_s {key} 1").status_code == 200
    return headers


def test_engineer_reads_confidential_records(stack):
    headers = seed_records(stack)
    resp = requests.get(
        f"{stack.base_url}/api/v1/records?asset=1&category=confidential",
        headers=headers,
        timeout=5,
    )
    assert resp.status_code == 200
    assert len(resp.json()["records"]) >= 1


def test_third_party_confidential_records_403(stack):
    seed_records(stack)
    headers = token_headers(stack, "partner-1")
    resp = requests.get(
        f"{stack.base_url}/api/v1/records?category=confidential", headers=headers, timeout=5
    )
    assert resp.status_code == 403


def test_records_empty_window(stack):
    headers = token_headers(stack, "engineer-1")
    resp = requests.get(
        f"{stack.base_url}/api/v1/records?from=1&to=2", headers=headers, timeout=5
    )
    assert resp.status_code == 200
    assert resp.json()["records"] == []


# -- threat profiles -----------------------------------------------------------------------------


def test_profiles_404_before_generation(tmp_path):
    local = build_stack(tmp_path, with_gateway=True)
    try:
        headers = token_headers(local, "admin-1")
        resp = requests.get(
            f"{local.base_url}/api/v1/threat-profiles/latest", headers=headers, timeout=5
        )
        assert resp.status_code == 404
    finally:
        local.stop()


def test_admin_fetches_latest_profile(stack):
    headers = token_headers(stack, "admin-1")
    key = stack.key_for(Role.ADMINISTRATOR).hex()
    generated = submit(stack, headers, f"gen_threat_profile_s {key}")
    assert generated.status_code == 200
    resp = requests.get(
        f"{stack.base_url}/api/v1/threat-profiles/latest", headers=headers, timeout=5
    )
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["profile_id"] == generated.json()["payload"]["profile_id"]
    assert "tree" in doc
    # Fetch by id as well.
    by_id = requests.get(
        f"{stack.base_url}/api/v1/threat-profiles/{doc['profile_id']}",
        headers=headers,
        timeout=5,
    )
    assert by_id.status_code == 200
    assert by_id.json() == doc


def test_engineer_profiles_403(stack):
    headers = token_headers(stack, "engineer-1")
    resp = requests.get(
        f"{stack.base_url}/api/v1/threat-profiles/latest", headers=headers, timeout=5
    )
    assert resp.status_code == 403


# -- audit trail -------------------------------------------------------------------------------


def test_authenticated_requests_are_audited(stack):
    before = len(stack.nw_audit.read())
    headers = token_headers(stack, "partner-1")  # login -> one record
    submit(stack, headers, "read 1 0x0010 1")  # dispatch -> several records
    records = stack.nw_audit.read()[before:]
    assert any(r.activity == "login" and r.principal == "partner-1" for r in records)
    assert any(r.activity == "read" and r.principal == "partner-1" for r in records)
