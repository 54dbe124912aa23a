"""
Checkpoint file: magic line, 8-byte little-endian header length, a JSON header listing
(name, shape, dtype) in order, then the concatenated little-endian float64 blobs.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from typing import Dict, Mapping

import numpy as np

from src.constants import CHECKPOINT_MAGIC
from src.exception import InvariantViolationError, MissingArtifactError

_DTYPE = "<f8"


def checkpoint_bytes(tensors: Mapping[str, np.ndarray]) -> bytes:
    entries = []
    blobs = []
    for name, arr in tensors.items():
        data = np.ascontiguousarray(np.asarray(arr, dtype=_DTYPE))
        entries.append({"name": name, "shape": list(data.shape), "dtype": _DTYPE})
        blobs.append(data.tobytes())
    header = json.dumps({"tensors": entries}, separators=(",", ":")).encode("utf-8")
    return CHECKPOINT_MAGIC + struct.pack("<Q", len(header)) + header + b"".join(blobs)


def state_checksum(tensors: Mapping[str, np.ndarray]) -> str:
    """sha256 of the serialized tensors; equal checksums mean bit-identical parameters."""
    return hashlib.sha256(checkpoint_bytes(tensors)).hexdigest()


def save_checkpoint(file_path: str, tensors: Mapping[str, np.ndarray]) -> None:
    os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
    with open(file_path, "wb") as fh:
        fh.write(checkpoint_bytes(tensors))


def load_checkpoint(file_path: str) -> Dict[str, np.ndarray]:
    if not os.path.exists(file_path):
        raise MissingArtifactError(f"checkpoint not found: {file_path}")
    with open(file_path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise InvariantViolationError(f"{file_path} is not a checkpoint file")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    offset += header_len

    out: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise InvariantViolationError(f"{file_path}: truncated blob for {entry['name']}")
        out[entry["name"]] = np.frombuffer(raw, dtype=entry["dtype"], count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise InvariantViolationError(f"{file_path}: {len(raw) - offset} trailing bytes")
    return out
