"""HTTP/1.1 surface over the gateway app.

Routes (JSON request/response bodies unless noted):

    POST /api/v1/auth/login                {user_id, credential}
    POST /api/v1/command                   {command: "<line>"}
    POST /api/v1/firmware/<filename>       raw image bytes
    GET  /api/v1/records?asset=&category=&from=&to=
    GET  /api/v1/threat-profiles/latest
    GET  /api/v1/threat-profiles/<id>
    GET  /api/v1/health
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from plantgate.gateway.app import GatewayApp, INVALID_TOKEN

logger = logging.getLogger(__name__)


class GatewayHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], app: GatewayApp):
        super().__init__(address, GatewayRequestHandler)
        self.app = app

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


class GatewayRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "plantgate"

    @property
    def app(self) -> GatewayApp:
        return self.server.app

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    # -- plumbing -----------------------------------------------------------------

    def _send(self, status: int, body: dict) -> None:
        raw = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _json_body(self) -> dict | None:
        try:
            obj = json.loads(self._read_body().decode("utf-8") or "{}")
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None
        return obj if isinstance(obj, dict) else None

    def _principal(self):
        auth = self.headers.get("Authorization", "")
        bearer = auth[len("Bearer "):] if auth.startswith("Bearer ") else None
        principal = self.app.authenticate(bearer)
        if principal is None:
            self.app.audit_reject(self.path)
            self._send(401, INVALID_TOKEN)
            return None
        return principal

    # -- routing ---------------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts == ["api", "v1", "health"]:
            self._send(*self.app.health())
            return
        if parts == ["api", "v1", "records"]:
            principal = self._principal()
            if principal is None:
                return
            query = {k: v[0] for k, v in parse_qs(url.query).items()}
            try:
                status, body = self.app.get_records(principal, query)
            except ValueError:
                status, body = 400, {"error": "BadRequest", "detail": "bad query parameter"}
            self._send(status, body)
            return
        if len(parts) == 4 and parts[:3] == ["api", "v1", "threat-profiles"]:
            principal = self._principal()
            if principal is None:
                return
            self._send(*self.app.get_profile(principal, parts[3]))
            return
        self._send(404, {"error": "NotFound"})

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts == ["api", "v1", "auth", "login"]:
            body = self._json_body()
            if body is None:
                self._send(400, {"error": "BadRequest"})
                return
            self._send(*self.app.login(body))
            return
        if parts == ["api", "v1", "command"]:
            principal = self._principal()
            if principal is None:
                return
            body = self._json_body()
            if body is None:
                self._send(400, {"error": "BadRequest"})
                return
            self._send(*self.app.submit_command(principal, body))
            return
        if len(parts) == 4 and parts[:3] == ["api", "v1", "firmware"]:
            principal = self._principal()
            if principal is None:
                return
            declared = int(self.headers.get("Content-Length") or 0)
            if declared > self.app.firmware_max_bytes:
                self._send(413, {"error": "TooLarge"})
                return
            data = self._read_body()
            self._send(*self.app.upload_firmware(principal, parts[3], data))
            return
        self._send(404, {"error": "NotFound"})


def make_http_server(app: GatewayApp, host: str = "127.0.0.1", port: int = 0) -> GatewayHTTPServer:
    return GatewayHTTPServer((host, port), app)
