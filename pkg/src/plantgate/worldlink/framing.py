"""Framed message channel between the worlds.

One frame per call or return: a 4-byte big-endian length followed by that many
bytes of UTF-8 JSON. Encoding is canonical (sorted keys, no whitespace) so a
decoded frame re-encodes to identical bytes.
"""

from __future__ import annotations

import json
import socket
import struct

from plantgate.worldlink.errors import ChannelError

LEN_STRUCT = struct.Struct(">I")
MAX_FRAME = 1 << 20  # channel messages are small; nothing bulk crosses here


def encode_message(message: dict) -> bytes:
    body = json.dumps(message, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise ChannelError(f"message of {len(body)} bytes exceeds frame limit")
    return LEN_STRUCT.pack(len(body)) + body


def decode_message(frame: bytes) -> dict:
    if len(frame) < LEN_STRUCT.size:
        raise ChannelError("short frame")
    (length,) = LEN_STRUCT.unpack_from(frame)
    body = frame[LEN_STRUCT.size:]
    if length != len(body):
        raise ChannelError(f"frame length {length} != body length {len(body)}")
    try:
        message = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChannelError(f"undecodable frame body: {exc}") from exc
    if not isinstance(message, dict):
        raise ChannelError("frame body is not an object")
    return message


def send_message(sock: socket.socket, message: dict) -> None:
    try:
        sock.sendall(encode_message(message))
    except OSError as exc:
        raise ChannelError(f"send failed: {exc}") from exc


def recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        try:
            chunk = sock.recv(remaining)
        except OSError as exc:
            raise ChannelError(f"recv failed: {exc}") from exc
        if not chunk:
            raise ChannelError("peer closed the channel")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_message(sock: socket.socket) -> dict:
    header = recv_exact(sock, LEN_STRUCT.size)
    (length,) = LEN_STRUCT.unpack(header)
    if length > MAX_FRAME:
        raise ChannelError(f"frame of {length} bytes exceeds limit")
    body = recv_exact(sock, length)
    return decode_message(header + body)


def parse_endpoint(endpoint: str) -> tuple[int, object]:
    """Map an endpoint string to a socket family and address.

    ``unix:/path`` or any string containing ``/`` is a filesystem socket;
    ``host:port`` is TCP loopback-style addressing.
    """
    if endpoint.startswith("unix:"):
        return socket.AF_UNIX, endpoint[len("unix:"):]
    if "/" in endpoint:
        return socket.AF_UNIX, endpoint
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"cannot parse endpoint {endpoint!r}")
    return socket.AF_INET, (host, int(port))
