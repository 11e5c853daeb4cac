"""Split-world industrial edge gateway for remote production-line maintenance.

The normal world hosts the REST gateway, activity manager, network client and
record store; security-sensitive checks run in a separate secure-world process
reached over a framed local channel. A simulated PLC fleet provides the
Modbus-TCP backend for tests and demos.
"""

__version__ = "0.1.0"
