"""Deterministic binary checkpoint format for named float64 arrays.

Layout::

    b"PPNCKPT1"
    uint64 little-endian header length
    header: UTF-8 JSON, sorted keys, no whitespace
    payload: every array as little-endian float64, in header order

The header lists each array's name, shape and byte offset into the payload,
plus a free-form ``meta`` dict. Writing the same arrays and meta always yields
the same bytes, and reading returns bit-identical arrays.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"PPNCKPT1"
VERSION = 1


def dumps(arrays: dict, meta: dict | None = None) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"version": VERSION, "arrays": entries, "meta": meta or {}},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def loads(blob: bytes) -> tuple[dict, dict]:
    if blob[:8] != MAGIC:
        raise DataError("not a policy checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt checkpoint header: {exc}") from None
    if header.get("version") != VERSION:
        raise DataError(f"unsupported checkpoint version {header.get('version')}")
    payload = memoryview(blob)[16 + hlen:]
    arrays = {}
    for e in header["arrays"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        start = e["offset"]
        if start + 8 * count > len(payload):
            raise DataError(f"checkpoint truncated at array {e['name']}")
        arr = np.frombuffer(payload[start:start + 8 * count], dtype="<f8").astype(np.float64)
        arrays[e["name"]] = arr.reshape(e["shape"])
    return arrays, header["meta"]


def save(path, arrays: dict, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(arrays, meta))


def load(path) -> tuple[dict, dict]:
    return loads(Path(path).read_bytes())
