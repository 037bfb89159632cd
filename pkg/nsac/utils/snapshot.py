"""
Binary field snapshots and run checkpoints.

A snapshot record is the magic ``NSAC1``, ``nx`` and ``ny`` as little-endian uint32, ``lx``, ``ly``
and ``t`` as little-endian float64, then ``nx * ny`` little-endian float64 values in row-major
order.
"""
import logging
import pathlib
import struct
import typing

import numpy as np

from .. import error
from ..const import CHECKPOINT_FORMAT_VERSION, SNAPSHOT_MAGIC
from ..model import CheckpointHeader

log = logging.getLogger(__name__)

_HEADER = struct.Struct("<5sIIddd")
_VALUE = np.dtype("<f8")

CHECKPOINT_RECORDS = ("phi", "q", "u", "v", "p")


def pack_record(values: np.ndarray, lx: float, ly: float, t: float) -> bytes:
    values = np.ascontiguousarray(values, dtype=_VALUE)
    if values.ndim != 2:
        raise error.SnapshotFormatError(f"Snapshot records are 2D, got {values.ndim}D")
    nx, ny = values.shape
    return _HEADER.pack(SNAPSHOT_MAGIC, nx, ny, lx, ly, t) + values.tobytes(order="C")


def unpack_record(buffer: bytes, offset: int = 0):
    """
    Decode one record.

    :return: ``(values, lx, ly, t, next_offset)``.
    :raises: :class:`.error.SnapshotFormatError`
    """
    if len(buffer) - offset < _HEADER.size:
        raise error.SnapshotFormatError("Truncated snapshot header")
    magic, nx, ny, lx, ly, t = _HEADER.unpack_from(buffer, offset)
    if magic != SNAPSHOT_MAGIC:
        raise error.SnapshotFormatError(f"Bad magic {magic!r}")
    start = offset + _HEADER.size
    end = start + nx * ny * _VALUE.itemsize
    if len(buffer) < end:
        raise error.SnapshotFormatError(f"Truncated payload, expected {nx}x{ny} values")
    values = np.frombuffer(buffer, dtype=_VALUE, count=nx * ny, offset=start).reshape(nx, ny)
    return values.astype(np.float64), lx, ly, t, end


def write_snapshot(path, values: np.ndarray, lx: float, ly: float, t: float):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_record(values, lx, ly, t))
    log.debug(f"Snapshot written to {path}")


def read_snapshot(path, shape: typing.Tuple[int, int] = None):
    """
    Read a single-record snapshot file.

    :param path: File to read.
    :param shape: Expected array shape, checked when given.
    :return: ``(values, lx, ly, t)``.
    :raises: :class:`.error.SnapshotFormatError`
    """
    buffer = pathlib.Path(path).read_bytes()
    values, lx, ly, t, end = unpack_record(buffer)
    if end != len(buffer):
        raise error.SnapshotFormatError(f"{len(buffer) - end} trailing bytes in {path}")
    if shape is not None and values.shape != tuple(shape):
        raise error.SnapshotFormatError(
            f"Snapshot has shape {values.shape}, expected {tuple(shape)}"
        )
    return values, lx, ly, t


def write_checkpoint(
    directory,
    arrays: typing.Dict[str, np.ndarray],
    lx: float,
    ly: float,
    header: CheckpointHeader,
):
    """
    Write ``checkpoint.nsac`` (one record per field of :data:`CHECKPOINT_RECORDS`) and
    ``checkpoint.meta`` into ``directory``.
    """
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = b"".join(pack_record(arrays[name], lx, ly, header.t) for name in CHECKPOINT_RECORDS)
    (directory / "checkpoint.nsac").write_bytes(payload)
    meta = [
        f"format_version = {header.format_version}",
        f"t = {header.t!r}",
        f"step = {header.step}",
        f"params_digest = {header.params_digest}",
        f"grid_digest = {header.grid_digest}",
    ]
    (directory / "checkpoint.meta").write_text("\n".join(meta) + "\n", encoding="utf-8")
    log.info(f"Checkpoint at t={header.t:.6g} (step {header.step}) written to {directory}")


def read_checkpoint(directory) -> typing.Tuple[typing.Dict[str, np.ndarray], CheckpointHeader]:
    """
    :raises: :class:`.error.SnapshotFormatError` on a malformed payload or meta file.
    """
    directory = pathlib.Path(directory)
    entries = {}
    for line in (directory / "checkpoint.meta").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise error.SnapshotFormatError(f"Malformed meta line {line!r}")
        entries[key.strip()] = value.strip()
    try:
        header = CheckpointHeader(
            format_version=int(entries["format_version"]),
            t=float(entries["t"]),
            step=int(entries["step"]),
            params_digest=entries["params_digest"],
            grid_digest=entries["grid_digest"],
        )
    except (KeyError, ValueError) as ex:
        raise error.SnapshotFormatError(f"Incomplete checkpoint meta: {ex}") from ex
    if header.format_version != CHECKPOINT_FORMAT_VERSION:
        raise error.SnapshotFormatError(f"Unsupported checkpoint format {header.format_version}")

    buffer = (directory / "checkpoint.nsac").read_bytes()
    arrays = {}
    offset = 0
    for name in CHECKPOINT_RECORDS:
        values, _, _, _, offset = unpack_record(buffer, offset)
        arrays[name] = values
    if offset != len(buffer):
        raise error.SnapshotFormatError("Trailing bytes after the checkpoint records")
    return arrays, header
