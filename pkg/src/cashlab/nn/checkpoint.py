"""Checkpoint file format.

Layout of a checkpoint file:

    8-byte magic  b"CASHCKP1"
    8-byte little-endian uint64: manifest length in bytes
    manifest: UTF-8 JSON with keys
        "meta":    free-form dict (arch kind, dims, ...)
        "tensors": list of {"name", "shape", "dtype", "offset"} in store order
    raw buffer: little-endian tensor bytes back to back in manifest order

Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import os
from typing import Dict, Tuple

import numpy as np

MAGIC = b"CASHCKP1"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str, arrays: Dict[str, np.ndarray], meta: dict) -> None:
    """Write atomically: temp file then rename."""
    entries = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob = le.tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.name,
            "offset": offset,
        })
        blobs.append(blob)
        offset += len(blob)
    manifest = json.dumps({"meta": meta, "tensors": entries},
                          sort_keys=True).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(len(manifest).to_bytes(8, "little"))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        mlen = int.from_bytes(f.read(8), "little")
        manifest = json.loads(f.read(mlen).decode("utf-8"))
        buf = f.read()
    arrays: Dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=start)
        arrays[entry["name"]] = arr.astype(entry["dtype"]).reshape(entry["shape"])
    return arrays, manifest["meta"]
