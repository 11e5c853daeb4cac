"""Gateway process entry point."""

from __future__ import annotations

import argparse
import signal
import sys
import threading

from plantgate.gateway.service import GatewayConfig, GatewayService


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plantgate-gateway", description="Run the normal-world gateway service."
    )
    parser.add_argument("--config", required=True, help="path to the gateway config file")
    args = parser.parse_args(argv)

    service = GatewayService(GatewayConfig.load(args.config)).start()
    print(f"gateway serving on {service.base_url}", flush=True)

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    service.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
