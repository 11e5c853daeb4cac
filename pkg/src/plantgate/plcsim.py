"""Simulated PLC fleet: one Modbus-TCP server per configured asset.

Each asset holds a sparse 16-bit register map (unset registers read 0x0000),
optional illegal address ranges answering exception 0x02, and a firmware slot.
Firmware arrives as ordered chunks (function code 100) and is committed with
function code 101, which sets the active image digest and returns the install
proof HMAC-SHA256(device key, digest). Chunk staging is per connection and
resets on connection loss before commit.

The module doubles as the test and demo backend; ``peek``/``poke`` give tests
direct register access without touching the wire.
"""

from __future__ import annotations

import argparse
import hashlib
import hmac
import json
import signal
import socket
import struct
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from plantgate import modbuswire as mw


class BindFailure(Exception):
    pass


class OutOfRange(Exception):
    pass


@dataclass
class SimAssetConfig:
    asset_id: int
    device_key: bytes
    host: str = "127.0.0.1"
    port: int = 0
    preload: dict[int, int] = field(default_factory=dict)
    illegal_ranges: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_dict(cls, obj: dict) -> "SimAssetConfig":
        preload = {_num(k): _num(v) for k, v in obj.get("preload", {}).items()}
        return cls(
            asset_id=obj["asset_id"],
            device_key=bytes.fromhex(obj["device_key_hex"]),
            host=obj.get("host", "127.0.0.1"),
            port=obj.get("port", 0),
            preload=preload,
            illegal_ranges=tuple(tuple(r) for r in obj.get("illegal_ranges", [])),
        )


def _num(value) -> int:
    if isinstance(value, int):
        return value
    return int(value, 16) if value.lower().startswith("0x") else int(value, 10)


class SimAsset:
    """Register map, firmware slot and request handling for one asset."""

    def __init__(self, config: SimAssetConfig):
        self.config = config
        self._registers: dict[int, int] = dict(config.preload)
        self._lock = threading.Lock()
        self.active_firmware_digest: Optional[bytes] = None
        self.active_firmware_size = 0
        self.frames_handled = 0
        self.connections_accepted = 0
        # Test hook: chunk indices whose acknowledgement is swallowed.
        self.drop_ack_for_chunks: set[int] = set()

    # -- direct access (test backdoor, never exposed on the network) --------------

    def peek(self, addr: int, count: int = 1) -> list[int]:
        self._check_window(addr, count)
        with self._lock:
            return [self._registers.get(a, 0) for a in range(addr, addr + count)]

    def poke(self, addr: int, words: list[int]) -> None:
        self._check_window(addr, len(words))
        with self._lock:
            for offset, word in enumerate(words):
                self._registers[addr + offset] = word & 0xFFFF

    @staticmethod
    def _check_window(addr: int, count: int) -> None:
        if count < 1 or addr < 0 or addr + count - 1 > 0xFFFF:
            raise OutOfRange(f"window [{addr}, {addr + count - 1}] outside 16-bit space")

    # -- wire handling ----------------------------------------------------------

    def handle_request(self, frame: mw.ModbusFrame, staging: dict[int, bytes]) -> Optional[mw.ModbusFrame]:
        """Response for one request frame; None when the frame is dropped."""
        self.frames_handled += 1
        txn, unit = frame.transaction_id, frame.unit_id
        fc = frame.function

        if fc == mw.FC_READ_HOLDING:
            if len(frame.body) != 4:
                return None
            addr, count = struct.unpack(">HH", frame.body)
            if not 1 <= count <= mw.MAX_READ_COUNT:
                return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_VALUE)
            if self._window_illegal(addr, count):
                return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_ADDRESS)
            with self._lock:
                words = [self._registers.get(a, 0) for a in range(addr, addr + count)]
            return mw.read_response(txn, unit, words)

        if fc == mw.FC_WRITE_MULTIPLE:
            if len(frame.body) < 5:
                return None
            addr, count, byte_count = struct.unpack(">HHB", frame.body[:5])
            payload = frame.body[5:]
            if not 1 <= count <= mw.MAX_WRITE_COUNT or byte_count != 2 * count or len(payload) != byte_count:
                return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_VALUE)
            if self._window_illegal(addr, count):
                return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_ADDRESS)
            words = [w for (w,) in struct.iter_unpack(">H", payload)]
            with self._lock:
                for offset, word in enumerate(words):
                    self._registers[addr + offset] = word
            return mw.write_response(txn, unit, addr, count)

        if fc == mw.FC_FW_CHUNK:
            if len(frame.body) < 2:
                return None
            (index,) = struct.unpack(">H", frame.body[:2])
            payload = frame.body[2:]
            if len(payload) > mw.MAX_CHUNK_BYTES:
                return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_VALUE)
            staging[index] = payload
            if index in self.drop_ack_for_chunks:
                return None
            return mw.chunk_ack(txn, unit, index)

        if fc == mw.FC_FW_COMMIT:
            if len(frame.body) != 2:
                return None
            (expected,) = struct.unpack(">H", frame.body)
            if expected == 0 or set(staging) != set(range(expected)):
                return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_VALUE)
            image = b"".join(staging[i] for i in range(expected))
            digest = hashlib.sha256(image).digest()
            with self._lock:
                self.active_firmware_digest = digest
                self.active_firmware_size = len(image)
            staging.clear()
            proof = hmac.new(self.config.device_key, digest, hashlib.sha256).digest()
            return mw.commit_response(txn, unit, proof)

        return mw.exception_response(txn, unit, fc, mw.EXC_ILLEGAL_FUNCTION)

    def _window_illegal(self, addr: int, count: int) -> bool:
        end = addr + count - 1
        if end > 0xFFFF:
            return True
        return any(addr <= b and end >= a for a, b in self.config.illegal_ranges)


class AssetServer:
    """Modbus-TCP service for one simulated asset; serves connections concurrently."""

    def __init__(self, asset: SimAsset):
        self.asset = asset
        self._listener: Optional[socket.socket] = None
        self._threads: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self._stopping = threading.Event()
        self.endpoint = ""

    def start(self) -> "AssetServer":
        cfg = self.asset.config
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((cfg.host, cfg.port))
        except OSError as exc:
            listener.close()
            raise BindFailure(f"cannot bind {cfg.host}:{cfg.port}: {exc}") from exc
        listener.listen(16)
        listener.settimeout(0.1)
        host, port = listener.getsockname()
        self.endpoint = f"{host}:{port}"
        self._listener = listener
        thread = threading.Thread(target=self._accept_loop, daemon=True, name="plcsim-accept")
        thread.start()
        self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            self._listener.close()
        for conn in list(self._conns):
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=2.0)

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)
            self.asset.connections_accepted += 1
            self._conns.append(conn)
            thread = threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True, name="plcsim-conn"
            )
            thread.start()
            self._threads.append(thread)

    def _serve_connection(self, conn: socket.socket) -> None:
        staging: dict[int, bytes] = {}  # chunk staging dies with the connection
        try:
            while not self._stopping.is_set():
                try:
                    frame = mw.recv_frame(conn)
                except (mw.FrameError, OSError):
                    return
                response = self.asset.handle_request(frame, staging)
                if response is None:
                    continue
                try:
                    conn.sendall(mw.encode_frame(response))
                except OSError:
                    return
        finally:
            try:
                conn.close()
            except OSError:
                pass


def start_fleet(configs: list[SimAssetConfig]) -> dict[int, AssetServer]:
    """Start one server per asset config, keyed by asset id."""
    servers: dict[int, AssetServer] = {}
    try:
        for cfg in configs:
            servers[cfg.asset_id] = AssetServer(SimAsset(cfg)).start()
    except BindFailure:
        for server in servers.values():
            server.stop()
        raise
    return servers


def load_fleet_config(path: str | Path) -> list[SimAssetConfig]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return [SimAssetConfig.from_dict(a) for a in obj["assets"]]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plantgate-plcsim", description="Run the simulated PLC fleet."
    )
    parser.add_argument("--config", required=True, help="fleet configuration file")
    args = parser.parse_args(argv)
    servers = start_fleet(load_fleet_config(args.config))
    for asset_id, server in servers.items():
        print(f"asset {asset_id} serving on {server.endpoint}", flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    for server in servers.values():
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
