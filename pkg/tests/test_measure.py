import pytest

from plantgate.worldlink import FileUnreadable, measure_image
from plantgate.worldlink.types import Measurement

from sha1_reference import sha1_reference


def test_empty_file_digest(tmp_path):
    f = tmp_path / "empty.bin"
    f.write_bytes(b"")
    m = measure_image(str(f))
    assert m.digest.hex() == "da39a3ee5e6b4b0d3255bfef95601890afd80709"
    assert m.digest == sha1_reference(b"")


def test_abc_digest(tmp_path):
    f = tmp_path / "abc.bin"
    f.write_bytes(b"abc")
    m = measure_image(str(f))
    assert m.digest.hex() == "a9993e364706816aba3e25717850c26c9cd0d89d"
    assert m.digest == sha1_reference(b"abc")


def test_matches_reference_on_larger_inputs(tmp_path):
    # Cross lengths around the 64-byte block boundary and a multi-block file.
    for n in (1, 55, 56, 63, 64, 65, 1000, 5000):
        f = tmp_path / f"f{n}.bin"
        payload = bytes((i * 37 + n) % 256 for i in range(n))
        f.write_bytes(payload)
        assert measure_image(str(f)).digest == sha1_reference(payload)


def test_deterministic(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"some image bytes")
    assert measure_image(str(f)).digest == measure_image(str(f)).digest


def test_default_digest_is_20_bytes(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"data")
    assert len(measure_image(str(f)).digest) == 20


def test_sha256_config_point(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"data")
    m = measure_image(str(f), algo="sha256")
    assert len(m.digest) == 32


def test_unreadable_file(tmp_path):
    with pytest.raises(FileUnreadable):
        measure_image(str(tmp_path / "missing.bin"))


def test_measurement_rejects_wrong_digest_length():
    with pytest.raises(ValueError):
        Measurement(image_path="x", digest=b"\x00" * 19)
