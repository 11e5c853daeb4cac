import tempfile
from pathlib import Path

import pytest

from plantgate import worldlink as wl
from plantgate.worldlink import (
    AttestationMismatch,
    ContextFinalized,
    Direction,
    EndpointUnreachable,
    HandlerError,
    Mode,
    NoTrainedHash,
    Parameter,
    SessionClosed,
    SessionsStillOpen,
    TooManyParameters,
    TrainingDisabled,
    TrustedApp,
    SecureWorldServer,
    WorldCommand,
)
from plantgate.worldlink.types import fmt_id

CMD_ECHO = 0x01
CMD_FAIL = 0x02


class EchoApp(TrustedApp):
    """Identity handler: copies the first In payload to every writable param."""

    ta_id = "ta.echo"

    def invoke(self, session, command_id, params):
        if command_id == CMD_ECHO:
            src = params[0].payload if params else b""
            for p in params[1:]:
                if p.direction is not Direction.IN:
                    p.payload = src
        elif command_id == CMD_FAIL:
            raise HandlerError("Boom", "requested failure")
        else:
            raise HandlerError("UnknownCommand")


def start_server(storage, mode=Mode.NORMAL, endpoint="127.0.0.1:0"):
    server = SecureWorldServer(endpoint, mode, storage, [EchoApp()])
    return server.start()


@pytest.fixture
def trained(tmp_path):
    """Normal-mode server with a trained image; yields (server, image path)."""
    image = tmp_path / "nw_image.bin"
    image.write_bytes(bytes(range(256)) * 16)
    storage = tmp_path / "sw"
    trainer = start_server(storage, Mode.TRAINING)
    ctx = wl.initialize_context(trainer.endpoint)
    wl.train(ctx, "ta.echo", image)
    wl.finalize_context(ctx)
    trainer.stop()
    server = start_server(storage, Mode.NORMAL)
    yield server, image
    server.stop()


def open_trained(trained):
    server, image = trained
    ctx = wl.initialize_context(server.endpoint)
    return ctx, wl.open_session(ctx, "ta.echo", image)


# -- context -----------------------------------------------------------------


def test_initialize_context_fresh_ids(trained):
    server, _ = trained
    a = wl.initialize_context(server.endpoint)
    b = wl.initialize_context(server.endpoint)
    assert a.context_id != b.context_id
    wl.finalize_context(a)
    wl.finalize_context(b)


def test_initialize_context_unreachable():
    with pytest.raises(EndpointUnreachable):
        wl.initialize_context("127.0.0.1:1", timeout=0.5)


def test_create_entry_point_once_per_process(trained):
    server, _ = trained
    for _ in range(3):
        ctx = wl.initialize_context(server.endpoint)
        wl.finalize_context(ctx)
    assert server.create_calls["ta.echo"] == 1


def test_finalize_with_open_session(trained):
    ctx, session = open_trained(trained)
    with pytest.raises(SessionsStillOpen):
        wl.finalize_context(ctx)
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_open_session_on_finalized_context(trained):
    server, image = trained
    ctx = wl.initialize_context(server.endpoint)
    wl.finalize_context(ctx)
    with pytest.raises(ContextFinalized):
        wl.open_session(ctx, "ta.echo", image)


# -- attestation ---------------------------------------------------------------


def test_attested_session_on_unchanged_image(trained):
    ctx, session = open_trained(trained)
    assert session.attested
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_single_byte_mutations_all_refused(tmp_path):
    # Exhaustive over a small image: every position, one bit flipped.
    image = tmp_path / "img.bin"
    original = bytes(range(32))
    image.write_bytes(original)
    storage = tmp_path / "sw"
    trainer = start_server(storage, Mode.TRAINING)
    ctx = wl.initialize_context(trainer.endpoint)
    wl.train(ctx, "ta.echo", image)
    wl.finalize_context(ctx)
    trainer.stop()

    server = start_server(storage, Mode.NORMAL)
    try:
        ctx = wl.initialize_context(server.endpoint)
        for pos in range(len(original)):
            mutated = bytearray(original)
            mutated[pos] ^= 0x01
            image.write_bytes(bytes(mutated))
            with pytest.raises(AttestationMismatch):
                wl.open_session(ctx, "ta.echo", image)
        image.write_bytes(original)
        session = wl.open_session(ctx, "ta.echo", image)
        assert session.attested
        wl.close_session(session)
        wl.finalize_context(ctx)
    finally:
        server.stop()


def test_mismatch_session_is_closed_for_invokes(trained):
    server, image = trained
    ctx = wl.initialize_context(server.endpoint)
    original = image.read_bytes()
    image.write_bytes(original[:-1] + bytes([original[-1] ^ 0xFF]))
    with pytest.raises(AttestationMismatch) as excinfo:
        wl.open_session(ctx, "ta.echo", image)
    image.write_bytes(original)
    closed_id = excinfo.value.closed_session_id
    assert closed_id is not None
    # Forged invocation against the refused session id fails as closed.
    resp = ctx._channel.call.__self__  # the channel object
    with pytest.raises(SessionClosed):
        resp.call(
            {
                "kind": "InvokeCommand",
                "session_id": fmt_id(closed_id),
                "command_id": CMD_ECHO,
                "params": [],
            }
        )
    wl.finalize_context(ctx)


def test_normal_mode_without_training(tmp_path):
    image = tmp_path / "img.bin"
    image.write_bytes(b"image")
    server = start_server(tmp_path / "sw", Mode.NORMAL)
    try:
        ctx = wl.initialize_context(server.endpoint)
        with pytest.raises(NoTrainedHash):
            wl.open_session(ctx, "ta.echo", image)
        wl.finalize_context(ctx)
    finally:
        server.stop()


def test_train_disabled_in_normal_mode(trained):
    server, image = trained
    ctx = wl.initialize_context(server.endpoint)
    with pytest.raises(TrainingDisabled):
        wl.train(ctx, "ta.echo", image)
    wl.finalize_context(ctx)


def test_retrain_replaces_reference(tmp_path):
    image = tmp_path / "img.bin"
    image.write_bytes(b"first image")
    storage = tmp_path / "sw"
    trainer = start_server(storage, Mode.TRAINING)
    ctx = wl.initialize_context(trainer.endpoint)
    wl.train(ctx, "ta.echo", image)
    image.write_bytes(b"second image")
    wl.train(ctx, "ta.echo", image)
    wl.finalize_context(ctx)
    trainer.stop()

    server = start_server(storage, Mode.NORMAL)
    try:
        ctx = wl.initialize_context(server.endpoint)
        session = wl.open_session(ctx, "ta.echo", image)  # second image attests
        wl.close_session(session)
        image.write_bytes(b"first image")
        with pytest.raises(AttestationMismatch):
            wl.open_session(ctx, "ta.echo", image)  # first no longer trusted
        wl.finalize_context(ctx)
    finally:
        server.stop()


# -- invocation -----------------------------------------------------------------


def test_echo_round_trip(trained):
    ctx, session = open_trained(trained)
    cmd = WorldCommand(
        CMD_ECHO,
        [Parameter(Direction.IN, b"AB"), Parameter(Direction.OUT)],
    )
    outs = wl.invoke_command(session, cmd)
    assert outs == [b"AB"]
    assert cmd.params[1].payload == b"AB"
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_in_parameters_unchanged(trained):
    ctx, session = open_trained(trained)
    in_payload = b"\x00\x01\x02\x03"
    cmd = WorldCommand(
        CMD_ECHO,
        [
            Parameter(Direction.IN, in_payload),
            Parameter(Direction.INOUT, b"overwrite me"),
            Parameter(Direction.IN, b"second in"),
        ],
    )
    wl.invoke_command(session, cmd)
    assert cmd.params[0].payload == in_payload
    assert cmd.params[2].payload == b"second in"
    assert cmd.params[1].payload == in_payload
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_five_parameters_unconstructible():
    with pytest.raises(TooManyParameters):
        WorldCommand(CMD_ECHO, [Parameter(Direction.IN)] * 5)


def test_four_parameters_accepted(trained):
    ctx, session = open_trained(trained)
    cmd = WorldCommand(
        CMD_ECHO,
        [
            Parameter(Direction.IN, b"x"),
            Parameter(Direction.OUT),
            Parameter(Direction.OUT),
            Parameter(Direction.INOUT, b"y"),
        ],
    )
    outs = wl.invoke_command(session, cmd)
    assert outs == [b"x", b"x", b"x"]
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_five_parameters_rejected_on_wire(trained):
    ctx, session = open_trained(trained)
    channel = ctx._channel
    with pytest.raises(TooManyParameters):
        channel.call(
            {
                "kind": "InvokeCommand",
                "session_id": fmt_id(session.session_id),
                "command_id": CMD_ECHO,
                "params": [{"dir": "in", "payload": ""}] * 5,
            }
        )
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_handler_error_propagates(trained):
    ctx, session = open_trained(trained)
    with pytest.raises(HandlerError) as excinfo:
        wl.invoke_command(session, WorldCommand(CMD_FAIL))
    assert excinfo.value.code == "Boom"
    wl.close_session(session)
    wl.finalize_context(ctx)


def test_invoke_audited_in_sw_log(trained):
    server, _ = trained
    ctx, session = open_trained((server, trained[1]))
    before = len(server.audit.read())
    wl.invoke_command(session, WorldCommand(CMD_ECHO, [Parameter(Direction.IN, b"z")]))
    records = server.audit.read()
    assert len(records) > before
    assert records[-1].activity == "ta.invoke"
    wl.close_session(session)
    wl.finalize_context(ctx)


# -- session lifecycle ------------------------------------------------------------


def test_close_is_idempotent(trained):
    ctx, session = open_trained(trained)
    wl.close_session(session)
    wl.close_session(session)  # no-op
    wl.finalize_context(ctx)


def test_invoke_after_close(trained):
    ctx, session = open_trained(trained)
    wl.close_session(session)
    with pytest.raises(SessionClosed):
        wl.invoke_command(session, WorldCommand(CMD_ECHO))
    wl.finalize_context(ctx)


def test_unix_socket_endpoint(tmp_path):
    image = tmp_path / "img.bin"
    image.write_bytes(b"image")
    sock_dir = tempfile.mkdtemp(prefix="wl")
    endpoint = f"unix:{Path(sock_dir) / 'sw.sock'}"
    server = start_server(tmp_path / "sw", Mode.TRAINING, endpoint=endpoint)
    try:
        ctx = wl.initialize_context(server.endpoint)
        session = wl.open_session(ctx, "ta.echo", image)
        assert session.attested
        wl.close_session(session)
        wl.finalize_context(ctx)
    finally:
        server.stop()
