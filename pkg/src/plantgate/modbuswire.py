"""Modbus-TCP wire subset shared by the client and the simulator.

MBAP header: transaction id (2B), protocol id (2B, always 0), length (2B,
counting unit id + function + body), unit id (1B); then function code and
body. Big-endian throughout. Function codes: 0x03 read holding registers,
0x10 write multiple registers, plus user-defined 100/101 for the firmware
transfer extension.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

MBAP = struct.Struct(">HHHB")

FC_READ_HOLDING = 0x03
FC_WRITE_MULTIPLE = 0x10
FC_FW_CHUNK = 100
FC_FW_COMMIT = 101

EXC_ILLEGAL_FUNCTION = 0x01
EXC_ILLEGAL_ADDRESS = 0x02
EXC_ILLEGAL_VALUE = 0x03

MAX_READ_COUNT = 125
MAX_WRITE_COUNT = 123
MAX_CHUNK_BYTES = 1024

PROOF_SIZE = 32


class FrameError(Exception):
    """Malformed or oversized frame."""


@dataclass(frozen=True)
class ModbusFrame:
    transaction_id: int
    unit_id: int
    function: int
    body: bytes
    protocol_id: int = 0

    def is_exception(self) -> bool:
        return bool(self.function & 0x80)

    @property
    def exception_code(self) -> int:
        if not self.is_exception():
            raise ValueError("not an exception frame")
        return self.body[0]


def encode_frame(frame: ModbusFrame) -> bytes:
    length = 2 + len(frame.body)  # unit id + function + body
    return (
        MBAP.pack(frame.transaction_id, frame.protocol_id, length, frame.unit_id)
        + bytes([frame.function])
        + frame.body
    )


def decode_frame(data: bytes) -> ModbusFrame:
    if len(data) < MBAP.size + 1:
        raise FrameError(f"frame too short: {len(data)} bytes")
    transaction_id, protocol_id, length, unit_id = MBAP.unpack_from(data)
    if protocol_id != 0:
        raise FrameError(f"protocol id {protocol_id} is not Modbus")
    body = data[MBAP.size + 1:]
    if length != 2 + len(body):
        raise FrameError(f"length field {length} disagrees with body of {len(body)}")
    return ModbusFrame(
        transaction_id=transaction_id,
        unit_id=unit_id,
        function=data[MBAP.size],
        body=body,
        protocol_id=protocol_id,
    )


def recv_frame(sock: socket.socket) -> ModbusFrame:
    """Read exactly one frame; raises FrameError on a garbled stream."""
    header = _recv_exact(sock, MBAP.size)
    transaction_id, protocol_id, length, unit_id = MBAP.unpack(header)
    if length < 2 or length > 2 + 256 + MAX_CHUNK_BYTES:
        raise FrameError(f"implausible MBAP length {length}")
    rest = _recv_exact(sock, length - 1)
    return decode_frame(header + rest)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise FrameError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


# -- request/response builders ---------------------------------------------------


def read_request(txn: int, unit: int, addr: int, count: int) -> ModbusFrame:
    return ModbusFrame(txn, unit, FC_READ_HOLDING, struct.pack(">HH", addr, count))


def read_response(txn: int, unit: int, words: list[int]) -> ModbusFrame:
    body = bytes([2 * len(words)]) + b"".join(struct.pack(">H", w) for w in words)
    return ModbusFrame(txn, unit, FC_READ_HOLDING, body)


def parse_read_response(frame: ModbusFrame, expected_count: int) -> list[int]:
    body = frame.body
    if not body or body[0] != 2 * expected_count or len(body) != 1 + body[0]:
        raise FrameError("malformed read response body")
    return [w for (w,) in struct.iter_unpack(">H", body[1:])]


def write_request(txn: int, unit: int, addr: int, words: list[int]) -> ModbusFrame:
    body = struct.pack(">HHB", addr, len(words), 2 * len(words)) + b"".join(
        struct.pack(">H", w) for w in words
    )
    return ModbusFrame(txn, unit, FC_WRITE_MULTIPLE, body)


def write_response(txn: int, unit: int, addr: int, count: int) -> ModbusFrame:
    return ModbusFrame(txn, unit, FC_WRITE_MULTIPLE, struct.pack(">HH", addr, count))


def chunk_request(txn: int, unit: int, index: int, payload: bytes) -> ModbusFrame:
    return ModbusFrame(txn, unit, FC_FW_CHUNK, struct.pack(">H", index) + payload)


def chunk_ack(txn: int, unit: int, index: int) -> ModbusFrame:
    return ModbusFrame(txn, unit, FC_FW_CHUNK, struct.pack(">H", index))


def commit_request(txn: int, unit: int, chunk_count: int) -> ModbusFrame:
    return ModbusFrame(txn, unit, FC_FW_COMMIT, struct.pack(">H", chunk_count))


def commit_response(txn: int, unit: int, proof: bytes) -> ModbusFrame:
    return ModbusFrame(txn, unit, FC_FW_COMMIT, proof)


def exception_response(txn: int, unit: int, function: int, code: int) -> ModbusFrame:
    return ModbusFrame(txn, unit, function | 0x80, bytes([code]))
