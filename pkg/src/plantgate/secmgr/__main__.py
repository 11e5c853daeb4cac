"""Secure-world process entry point."""

from __future__ import annotations

import argparse
import signal
import sys
import threading

from plantgate.secmgr.config import SecureWorldConfig, build_server


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plantgate-secworld",
        description="Run the secure-world process hosting the security manager.",
    )
    parser.add_argument("--config", required=True, help="path to the secure-world config file")
    args = parser.parse_args(argv)

    cfg = SecureWorldConfig.load(args.config)
    server = build_server(cfg)
    server.start()
    print(f"secure world serving on {server.endpoint} (mode={cfg.mode.value})", flush=True)

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
