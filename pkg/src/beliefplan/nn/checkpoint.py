"""Self-describing checkpoint container.

Layout: magic line, 8-byte little-endian header length, UTF-8 JSON header,
then the raw parameter payload.  The header maps each parameter name to its
shape, dtype and byte offset into the payload, and carries a free-form
metadata dict (model dims, seed, schema version).  Arrays are stored as
little-endian floats, so save -> load round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError

MAGIC = b"BPLANCKPT1\n"
SCHEMA_VERSION = 1

_DTYPE_TAGS = {"<f8": "<f8", "<f4": "<f4"}


def save_checkpoint(path, arrays: dict[str, np.ndarray], metadata: dict) -> None:
    path = Path(path)
    entries = {}
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        tag = arr.dtype.newbyteorder("<").str
        if tag not in _DTYPE_TAGS:
            raise ConfigurationError(f"unsupported checkpoint dtype {arr.dtype} for {name!r}")
        raw = arr.astype(tag, copy=False).tobytes()
        entries[name] = {
            "shape": list(arr.shape),
            "dtype": tag,
            "offset": len(payload),
            "nbytes": len(raw),
        }
        payload.extend(raw)
    header = {
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata,
        "parameters": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(bytes(payload))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigurationError(f"{path} is not a checkpoint file")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("schema_version") != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported checkpoint schema {header.get('schema_version')}"
            )
        payload = fh.read()
    arrays = {}
    for name, entry in header["parameters"].items():
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
        arrays[name] = arr
    return arrays, header["metadata"]
