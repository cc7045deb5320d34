"""Binary field snapshots.

Layout: magic ``b"BEQT"``, uint32 format version, uint32 header length, a
UTF-8 JSON header (n, kind, time, params, version), then the payload as
little-endian float64 in row-major order, components first:
scalar / (u1, u2, u3) / (q11, q12, q13, q22, q23).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from berislab.errors import SnapshotMagicError, SnapshotSizeError, SnapshotVersionError
from berislab.qtensor import Params
from berislab.spectral2d import KINDS, Field, Grid

MAGIC = b"BEQT"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


def encode(field: Field, time: float = 0.0, params: Params | None = None) -> bytes:
    header = {
        "version": VERSION,
        "n": field.grid.n,
        "kind": field.kind,
        "time": float(time),
        "params": dataclasses.asdict(params) if params is not None else None,
    }
    head = json.dumps(header, sort_keys=True).encode()
    payload = np.ascontiguousarray(field.data, dtype="<f8").tobytes()
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + payload


def decode(blob: bytes) -> tuple[Field, dict]:
    if len(blob) < _PREFIX.size:
        raise SnapshotSizeError(f"snapshot too short: {len(blob)} bytes")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotVersionError(f"unsupported snapshot version {version}")
    if len(blob) < _PREFIX.size + hlen:
        raise SnapshotSizeError("snapshot truncated inside header")
    try:
        header = json.loads(blob[_PREFIX.size : _PREFIX.size + hlen])
    except ValueError as exc:
        raise SnapshotVersionError(f"unreadable header: {exc}") from None
    if header.get("version") != VERSION:
        raise SnapshotVersionError(f"header version {header.get('version')} != {VERSION}")
    kind = header.get("kind")
    if kind not in KINDS:
        raise SnapshotVersionError(f"unknown payload kind {kind!r}")
    n = int(header["n"])
    count = KINDS[kind] * n * n
    payload = blob[_PREFIX.size + hlen :]
    if len(payload) != 8 * count:
        raise SnapshotSizeError(f"payload has {len(payload)} bytes, expected {8 * count}")
    data = np.frombuffer(payload, dtype="<f8").reshape(KINDS[kind], n, n).astype(float)
    return Field(Grid(n), kind, data), header


def write(path, field: Field, time: float = 0.0, params: Params | None = None) -> None:
    Path(path).write_bytes(encode(field, time, params))


def read(path) -> tuple[Field, dict]:
    return decode(Path(path).read_bytes())
