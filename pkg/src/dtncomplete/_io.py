"""Deterministic single-file binary container for named arrays.

Layout::

    8 bytes   magic  b"DTNCREC\\0"
    4 bytes   format version (uint32, little-endian)
    8 bytes   header length in bytes (uint64, little-endian)
    header    UTF-8 JSON, sorted keys: {"kind", "meta", "arrays": [...]}
    payload   raw little-endian array bytes, concatenated in header order

Every array entry in the header records ``name``, ``dtype``, ``shape``,
``offset`` and ``nbytes`` (offset relative to the start of the payload).
The output depends only on the inputs, so files are byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DTNCREC\0"
VERSION = 1

_ALLOWED = {"<f8", "<f4", "<u4", "<i8", "|u1", "<u8"}


class FormatError(ValueError):
    """Raised when a file is not a valid container."""


def _as_le(arr):
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder not in ("|", "<") else arr.dtype
    arr = arr.astype(dt, copy=False)
    if arr.dtype.str not in _ALLOWED:
        raise TypeError(f"unsupported dtype {arr.dtype.str} for container")
    return arr


def dumps(kind: str, arrays: dict, meta: dict | None = None) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        arr = _as_le(arr)
        raw = arr.tobytes(order="C")
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"kind": kind, "meta": meta or {}, "arrays": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return b"".join(
        [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(header)), header, *blobs]
    )


def loads(data: bytes, kind: str | None = None):
    """Parse container bytes; returns ``(arrays, meta)``."""
    if data[:8] != MAGIC:
        raise FormatError("bad magic")
    (version,) = struct.unpack("<I", data[8:12])
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    (hlen,) = struct.unpack("<Q", data[12:20])
    header = json.loads(data[20 : 20 + hlen].decode("utf-8"))
    if kind is not None and header["kind"] != kind:
        raise FormatError(f"expected a {kind!r} record, found {header['kind']!r}")
    base = 20 + hlen
    arrays = {}
    for e in header["arrays"]:
        start = base + e["offset"]
        buf = data[start : start + e["nbytes"]]
        if len(buf) != e["nbytes"]:
            raise FormatError(f"truncated payload for {e['name']}")
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return arrays, header["meta"]


def save(path, kind: str, arrays: dict, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(kind, arrays, meta))
    os.replace(tmp, path)


def load(path, kind: str | None = None):
    return loads(Path(path).read_bytes(), kind=kind)


def digest(*parts) -> str:
    """Short sha256 hex digest over bytes / str / JSON-able parts."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, bytes):
            h.update(p)
        elif isinstance(p, str):
            h.update(p.encode("utf-8"))
        else:
            h.update(json.dumps(p, sort_keys=True).encode("utf-8"))
    return h.hexdigest()[:16]
