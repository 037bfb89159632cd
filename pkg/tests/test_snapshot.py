import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from nsac import error
from nsac.model import CheckpointHeader
from nsac.utils import snapshot


@pytest.fixture
def values(rng):
    return rng.normal(size=(6, 4))


@pytest.fixture
def header():
    return CheckpointHeader(format_version=1, t=0.125, step=7, params_digest="ab", grid_digest="cd")


def _arrays(rng):
    return {
        "phi": rng.normal(size=(6, 4)),
        "q": rng.normal(size=(6, 4)),
        "u": rng.normal(size=(7, 4)),
        "v": rng.normal(size=(6, 5)),
        "p": rng.normal(size=(6, 4)),
    }


def test_record_layout(values):
    data = snapshot.pack_record(values, 1.0, 0.5, 0.25)
    assert len(data) == 37 + 8 * values.size
    assert data[:5] == b"NSAC1"
    assert struct.unpack("<II", data[5:13]) == (6, 4)
    assert struct.unpack("<ddd", data[13:37]) == (1.0, 0.5, 0.25)
    assert np.frombuffer(data[37:45], "<f8")[0] == values[0, 0]
    assert np.frombuffer(data[45:53], "<f8")[0] == values[0, 1]


def test_snapshot_file(tmp_path, values):
    path = tmp_path / "fields" / "phi_000000.nsac"
    snapshot.write_snapshot(path, values, 1.0, 0.5, 0.25)
    read, lx, ly, t = snapshot.read_snapshot(path, shape=(6, 4))
    assert_array_equal(read, values)
    assert (lx, ly, t) == (1.0, 0.5, 0.25)
    with pytest.raises(error.SnapshotFormatError):
        snapshot.read_snapshot(path, shape=(4, 6))


def test_only_2d_arrays_are_packed():
    with pytest.raises(error.SnapshotFormatError):
        snapshot.pack_record(np.zeros(5), 1.0, 1.0, 0.0)


@pytest.mark.parametrize(
    "damage",
    [
        lambda data: b"NSAC2" + data[5:],
        lambda data: data[:-8],
        lambda data: data[:20],
        lambda data: data + b"\0",
    ],
    ids=["magic", "payload", "header", "trailing"],
)
def test_damaged_snapshots_are_rejected(tmp_path, values, damage):
    path = tmp_path / "bad.nsac"
    path.write_bytes(damage(snapshot.pack_record(values, 1.0, 1.0, 0.0)))
    with pytest.raises(error.SnapshotFormatError):
        snapshot.read_snapshot(path)


def test_checkpoint_round_trip(tmp_path, rng, header):
    arrays = _arrays(rng)
    snapshot.write_checkpoint(tmp_path, arrays, 1.5, 1.0, header)
    assert (tmp_path / "checkpoint.meta").read_text().splitlines()[1] == "t = 0.125"
    read, read_header = snapshot.read_checkpoint(tmp_path)
    assert read_header == header
    assert list(read) == list(snapshot.CHECKPOINT_RECORDS)
    for name, values in arrays.items():
        assert_array_equal(read[name], values)


def test_checkpoint_keeps_the_exact_time(tmp_path, rng, header):
    t = 0.1 + 0.2
    snapshot.write_checkpoint(tmp_path, _arrays(rng), 1.0, 1.0, header.__class__(1, t, 3, "a", "b"))
    assert snapshot.read_checkpoint(tmp_path)[1].t == t


def test_unsupported_checkpoint_version(tmp_path, rng, header):
    snapshot.write_checkpoint(tmp_path, _arrays(rng), 1.0, 1.0, header)
    meta = tmp_path / "checkpoint.meta"
    meta.write_text(meta.read_text().replace("format_version = 1", "format_version = 9"))
    with pytest.raises(error.SnapshotFormatError, match="Unsupported"):
        snapshot.read_checkpoint(tmp_path)


def test_incomplete_checkpoint_meta(tmp_path, rng, header):
    snapshot.write_checkpoint(tmp_path, _arrays(rng), 1.0, 1.0, header)
    meta = tmp_path / "checkpoint.meta"
    meta.write_text("\n".join(meta.read_text().splitlines()[:-1]))
    with pytest.raises(error.SnapshotFormatError):
        snapshot.read_checkpoint(tmp_path)
    meta.write_text("format_version 1\n")
    with pytest.raises(error.SnapshotFormatError):
        snapshot.read_checkpoint(tmp_path)


def test_checkpoint_with_trailing_bytes(tmp_path, rng, header):
    snapshot.write_checkpoint(tmp_path, _arrays(rng), 1.0, 1.0, header)
    payload = tmp_path / "checkpoint.nsac"
    payload.write_bytes(payload.read_bytes() + b"extra")
    with pytest.raises(error.SnapshotFormatError):
        snapshot.read_checkpoint(tmp_path)
