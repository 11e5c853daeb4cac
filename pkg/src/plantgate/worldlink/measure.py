"""Image measurement for attestation."""

from __future__ import annotations

from plantgate.worldlink.errors import FileUnreadable
from plantgate.worldlink.types import DEFAULT_HASH_ALGO, HASH_ALGOS, Measurement, Mode


def measure_image(
    image_path: str,
    algo: str = DEFAULT_HASH_ALGO,
    mode: Mode = Mode.NORMAL,
) -> Measurement:
    """Digest the raw bytes of the file at ``image_path``.

    The default algorithm is SHA-1; SHA-256 is available as a configuration
    point. Rereading an unchanged file yields an identical digest.
    """
    if algo not in HASH_ALGOS:
        raise ValueError(f"unknown measurement hash {algo!r}")
    hasher = HASH_ALGOS[algo]()
    try:
        with open(image_path, "rb") as fh:
            while True:
                chunk = fh.read(65536)
                if not chunk:
                    break
                hasher.update(chunk)
    except OSError as exc:
        raise FileUnreadable(f"cannot measure {image_path}: {exc}") from exc
    return Measurement(image_path=str(image_path), digest=hasher.digest(), algo=algo, mode=mode)
