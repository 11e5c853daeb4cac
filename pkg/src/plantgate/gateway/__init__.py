"""REST gateway: authentication, role resolution, HTTP bridge to the activity manager."""

from plantgate.gateway.app import GatewayApp
from plantgate.gateway.http import GatewayHTTPServer, make_http_server
from plantgate.gateway.service import GatewayConfig, GatewayService
from plantgate.gateway.tokens import AuthToken, TokenTable
from plantgate.gateway.users import UserEntry, UserFile, make_user, write_user_file

__all__ = [
    "GatewayApp",
    "GatewayHTTPServer",
    "make_http_server",
    "GatewayConfig",
    "GatewayService",
    "AuthToken",
    "TokenTable",
    "UserEntry",
    "UserFile",
    "make_user",
    "write_user_file",
]
