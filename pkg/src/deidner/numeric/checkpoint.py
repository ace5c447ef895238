"""Binary checkpoint container.

Layout::

    b"DEIDCKPT" | u32 version | u64 header length | JSON header | raw arrays

The JSON header (UTF-8, sorted keys) holds free-form ``meta`` (model config,
vocabulary, labels) and one entry per array with its name, shape, dtype and
byte offset into the payload.  Arrays are stored as little-endian float64 in
row-major order.  Writing the same inputs always yields the same bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"DEIDCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        raw = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "<f8",
                        "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "tensors": entries}, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<IQ", VERSION, len(header)) + header + b"".join(chunks)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    pos = len(MAGIC)
    try:
        version, hlen = struct.unpack_from("<IQ", blob, pos)
    except struct.error:
        raise CheckpointError("truncated checkpoint header") from None
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos += struct.calcsize("<IQ")
    try:
        header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError("corrupt checkpoint header") from None
    payload = memoryview(blob)[pos + hlen :]
    arrays = {}
    for e in header["tensors"]:
        if e["dtype"] != "<f8":
            raise CheckpointError(f"unsupported dtype {e['dtype']} for {e['name']}")
        if e["offset"] + e["nbytes"] > len(payload):
            raise CheckpointError(f"truncated checkpoint: array {e['name']} is incomplete")
        raw = payload[e["offset"] : e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(raw, dtype="<f8").reshape(e["shape"]).astype(np.float64)
    return arrays, header["meta"]


def save(path, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> None:
    Path(path).write_bytes(dumps(arrays, meta))


def load(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    return loads(Path(path).read_bytes())
