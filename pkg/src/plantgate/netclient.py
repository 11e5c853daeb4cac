"""Modbus-TCP client for talking to assets: connect, read, write, firmware transfer.

One transaction is in flight per connection at a time; transaction ids are
strictly increasing modulo 2^16 and a response whose transaction id does not
match the pending request is discarded and counted, never surfaced as data.
"""

from __future__ import annotations

import socket
import time
from typing import Callable, Optional

from plantgate import modbuswire as mw

DEFAULT_TIMEOUT = 2.0
DEFAULT_UNIT_ID = 1


class NetClientError(Exception):
    pass


class ConnectRefused(NetClientError):
    pass


class Timeout(NetClientError):
    pass


class NotConnected(NetClientError):
    pass


class CountTooLarge(NetClientError):
    pass


class TransferError(NetClientError):
    pass


class ExceptionResponse(NetClientError):
    def __init__(self, code: int):
        super().__init__(f"exception response, code {code:#04x}")
        self.code = code


class AssetConnection:
    """A live connection to one asset's Modbus service."""

    def __init__(self, asset_id: int, endpoint: str, sock: socket.socket, timeout: float):
        self.asset_id = asset_id
        self.endpoint = endpoint
        self.unit_id = DEFAULT_UNIT_ID
        self.timeout = timeout
        self.mismatched_responses = 0
        self._sock: Optional[socket.socket] = sock
        self._txn = 1

    @property
    def connected(self) -> bool:
        return self._sock is not None

    def next_txn(self) -> int:
        txn = self._txn
        self._txn = (self._txn + 1) & 0xFFFF
        return txn

    def _require_socket(self) -> socket.socket:
        if self._sock is None:
            raise NotConnected("connection is closed")
        return self._sock

    def transact(self, frame: mw.ModbusFrame, timeout: Optional[float] = None) -> mw.ModbusFrame:
        """Send one request and wait for its matching response."""
        sock = self._require_socket()
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout)
        try:
            sock.sendall(mw.encode_frame(frame))
        except OSError as exc:
            raise NetClientError(f"send failed: {exc}") from exc
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise Timeout(f"no response to transaction {frame.transaction_id}")
            sock.settimeout(remaining)
            try:
                response = mw.recv_frame(sock)
            except socket.timeout:
                raise Timeout(f"no response to transaction {frame.transaction_id}") from None
            except (mw.FrameError, OSError) as exc:
                raise NetClientError(f"receive failed: {exc}") from exc
            if response.transaction_id != frame.transaction_id:
                self.mismatched_responses += 1
                continue
            return response


def connect(asset_id: int, endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> AssetConnection:
    host, _, port = endpoint.rpartition(":")
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    try:
        sock.connect((host, int(port)))
    except ConnectionRefusedError as exc:
        sock.close()
        raise ConnectRefused(f"{endpoint}: {exc}") from exc
    except socket.timeout as exc:
        sock.close()
        raise Timeout(f"connecting to {endpoint}") from exc
    except OSError as exc:
        sock.close()
        raise ConnectRefused(f"{endpoint}: {exc}") from exc
    return AssetConnection(asset_id, endpoint, sock, timeout)


def disconnect(conn: AssetConnection) -> None:
    """Idempotent teardown."""
    if conn._sock is not None:
        try:
            conn._sock.close()
        except OSError:
            pass
        conn._sock = None


def read_registers(conn: AssetConnection, addr: int, count: int) -> list[int]:
    if count < 1:
        raise ValueError("count must be at least 1")
    if count > mw.MAX_READ_COUNT:
        raise CountTooLarge(f"count {count} exceeds {mw.MAX_READ_COUNT}")
    request = mw.read_request(conn.next_txn(), conn.unit_id, addr, count)
    response = conn.transact(request)
    if response.is_exception():
        raise ExceptionResponse(response.exception_code)
    return mw.parse_read_response(response, count)


def write_registers(conn: AssetConnection, addr: int, words: list[int]) -> None:
    if not words:
        raise ValueError("word list must be non-empty")
    if len(words) > mw.MAX_WRITE_COUNT:
        raise CountTooLarge(f"{len(words)} words exceeds {mw.MAX_WRITE_COUNT}")
    request = mw.write_request(conn.next_txn(), conn.unit_id, addr, words)
    response = conn.transact(request)
    if response.is_exception():
        raise ExceptionResponse(response.exception_code)
    if response.body != mw.write_response(0, 0, addr, len(words)).body:
        raise NetClientError(f"write echo mismatch: {response.body.hex()}")


def read_window(conn: AssetConnection, addr: int, count: int) -> list[int]:
    """Read a window of arbitrary size as consecutive bounded reads."""
    words: list[int] = []
    offset = 0
    while offset < count:
        step = min(mw.MAX_READ_COUNT, count - offset)
        words.extend(read_registers(conn, addr + offset, step))
        offset += step
    return words


def transfer_firmware(
    conn: AssetConnection,
    image: bytes,
    chunk_size: int = mw.MAX_CHUNK_BYTES,
    fault_hook: Optional[Callable[[int, bytes], bytes]] = None,
) -> bytes:
    """Send the image as ordered chunks, commit, and return the install proof.

    ``fault_hook`` lets tests corrupt a chunk in transit.
    """
    if not image:
        raise ValueError("image must be non-empty")
    if not 1 <= chunk_size <= mw.MAX_CHUNK_BYTES:
        raise ValueError(f"chunk size must be within 1..{mw.MAX_CHUNK_BYTES}")
    chunks = [image[i:i + chunk_size] for i in range(0, len(image), chunk_size)]
    for index, chunk in enumerate(chunks):
        if fault_hook is not None:
            chunk = fault_hook(index, chunk)
        request = mw.chunk_request(conn.next_txn(), conn.unit_id, index, chunk)
        try:
            ack = conn.transact(request)
        except Timeout as exc:
            raise TransferError(f"missing ack for chunk {index}") from exc
        if ack.is_exception():
            raise TransferError(f"chunk {index} rejected, code {ack.exception_code:#04x}")
        if ack.body != index.to_bytes(2, "big"):
            raise TransferError(f"bad ack for chunk {index}: {ack.body.hex()}")
    commit = mw.commit_request(conn.next_txn(), conn.unit_id, len(chunks))
    response = conn.transact(commit)
    if response.is_exception():
        raise TransferError(f"commit rejected, code {response.exception_code:#04x}")
    if len(response.body) != mw.PROOF_SIZE:
        raise TransferError(f"install proof of {len(response.body)} bytes")
    return response.body
