import hashlib

import pytest
from hypothesis import given, settings, strategies as st

from plantgate import modbuswire as mw
from plantgate.plcsim import OutOfRange, SimAsset, SimAssetConfig

from hmac_reference import hmac_sha256_reference

KEY = b"\x42" * 32


def make_asset(**kwargs) -> SimAsset:
    return SimAsset(SimAssetConfig(asset_id=1, device_key=KEY, **kwargs))


def test_read_preloaded_registers():
    asset = make_asset(preload={0x0010: 0xBEEF, 0x0011: 0x1234})
    response = asset.handle_request(mw.read_request(1, 1, 0x0010, 2), {})
    assert mw.parse_read_response(response, 2) == [0xBEEF, 0x1234]


def test_unset_registers_read_zero():
    asset = make_asset()
    response = asset.handle_request(mw.read_request(1, 1, 0x0200, 3), {})
    assert mw.parse_read_response(response, 3) == [0, 0, 0]


def test_write_then_read():
    asset = make_asset()
    asset.handle_request(mw.write_request(1, 1, 0x0040, [0x00AA, 0x00BB]), {})
    response = asset.handle_request(mw.read_request(2, 1, 0x0040, 2), {})
    assert mw.parse_read_response(response, 2) == [0x00AA, 0x00BB]


def test_unknown_function_code():
    asset = make_asset()
    request = mw.ModbusFrame(1, 1, 0x63, b"")
    response = asset.handle_request(request, {})
    assert response.function == 0x63 | 0x80
    assert response.exception_code == mw.EXC_ILLEGAL_FUNCTION


def test_illegal_range_answers_exception_02():
    asset = make_asset(illegal_ranges=((0x0300, 0x030F),))
    response = asset.handle_request(mw.read_request(1, 1, 0x02FF, 4), {})
    assert response.is_exception()
    assert response.exception_code == mw.EXC_ILLEGAL_ADDRESS
    response = asset.handle_request(mw.write_request(2, 1, 0x0305, [1]), {})
    assert response.exception_code == mw.EXC_ILLEGAL_ADDRESS


def test_window_past_address_space():
    asset = make_asset()
    response = asset.handle_request(mw.read_request(1, 1, 0xFFFF, 2), {})
    assert response.exception_code == mw.EXC_ILLEGAL_ADDRESS


def test_count_bounds():
    asset = make_asset()
    response = asset.handle_request(mw.read_request(1, 1, 0, 126), {})
    assert response.exception_code == mw.EXC_ILLEGAL_VALUE


def test_response_echoes_transaction_and_unit():
    asset = make_asset()
    response = asset.handle_request(mw.read_request(0x1234, 0x42, 0, 1), {})
    assert response.transaction_id == 0x1234
    assert response.unit_id == 0x42


# -- firmware slot ------------------------------------------------------------


def test_firmware_staging_and_commit():
    asset = make_asset()
    staging = {}
    asset.handle_request(mw.chunk_request(1, 1, 0, b"aa" * 100), staging)
    asset.handle_request(mw.chunk_request(2, 1, 1, b"bb" * 100), staging)
    assert asset.active_firmware_digest is None  # commit only on fc 101
    response = asset.handle_request(mw.commit_request(3, 1, 2), staging)
    image = b"aa" * 100 + b"bb" * 100
    digest = hashlib.sha256(image).digest()
    assert asset.active_firmware_digest == digest
    assert response.body == hmac_sha256_reference(KEY, digest)
    assert staging == {}


def test_commit_with_missing_chunk_rejected():
    asset = make_asset()
    staging = {}
    asset.handle_request(mw.chunk_request(1, 1, 0, b"x"), staging)
    asset.handle_request(mw.chunk_request(2, 1, 2, b"z"), staging)  # gap at 1
    response = asset.handle_request(mw.commit_request(3, 1, 3), staging)
    assert response.exception_code == mw.EXC_ILLEGAL_VALUE
    assert asset.active_firmware_digest is None


def test_dropped_ack_hook():
    asset = make_asset()
    asset.drop_ack_for_chunks = {1}
    staging = {}
    assert asset.handle_request(mw.chunk_request(1, 1, 0, b"x"), staging) is not None
    assert asset.handle_request(mw.chunk_request(2, 1, 1, b"y"), staging) is None


# -- peek/poke ------------------------------------------------------------------


def test_poke_then_wire_read():
    asset = make_asset()
    asset.poke(0x0123, [0x5555])
    response = asset.handle_request(mw.read_request(1, 1, 0x0123, 1), {})
    assert mw.parse_read_response(response, 1) == [0x5555]


def test_wire_write_then_peek():
    asset = make_asset()
    asset.handle_request(mw.write_request(1, 1, 0x0088, [0x0F0F]), {})
    assert asset.peek(0x0088) == [0x0F0F]


def test_peek_out_of_range():
    asset = make_asset()
    with pytest.raises(OutOfRange):
        asset.peek(65536)
    with pytest.raises(OutOfRange):
        asset.poke(0xFFFF, [1, 2])


# -- wire/state coherence property ------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(
    ops=st.lists(
        st.tuples(
            st.integers(0, 0x00FF),
            st.lists(st.integers(0, 0xFFFF), min_size=1, max_size=8),
        ),
        min_size=1,
        max_size=20,
    )
)
def test_wire_state_coherence(ops):
    asset = make_asset()
    txn = 0
    for addr, words in ops:
        txn += 1
        asset.handle_request(mw.write_request(txn, 1, addr, words), {})
        txn += 1
        response = asset.handle_request(mw.read_request(txn, 1, addr, len(words)), {})
        assert mw.parse_read_response(response, len(words)) == asset.peek(addr, len(words))
        assert asset.peek(addr, len(words)) == words
