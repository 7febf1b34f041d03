"""PSAF feature files: a 16-byte header and a float32 time-major payload.

Layout (little-endian)::

    b"PSAF" | version u32 (=1) | L u32 | M u32 | L*M float32

Each ``x.psaf`` may have a ``x.psaf.json`` sidecar describing how it was made.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"PSAF"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class FeatureFileError(ValueError):
    pass


def encode(values) -> bytes:
    x = np.asarray(values)
    if x.ndim != 2:
        raise FeatureFileError(f"feature matrix must be 2-D, got shape {x.shape}")
    L, M = x.shape
    return _HEADER.pack(MAGIC, VERSION, L, M) + np.ascontiguousarray(x, dtype="<f4").tobytes()


def decode(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise FeatureFileError("file shorter than the PSAF header")
    magic, version, L, M = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FeatureFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFileError(f"unsupported PSAF version {version}")
    payload = blob[_HEADER.size:]
    if len(payload) != L * M * 4:
        raise FeatureFileError(f"payload is {len(payload)} bytes, header implies {L * M * 4}")
    return np.frombuffer(payload, dtype="<f4").reshape(L, M).copy()


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_features(path: str | os.PathLike, values, metadata: dict | None = None) -> str:
    """Write a PSAF file (and sidecar if ``metadata`` is given); returns the sha256 digest."""
    path = Path(path)
    blob = encode(values)
    digest = hashlib.sha256(blob).hexdigest()
    atomic_write(path, blob)
    if metadata is not None:
        doc = {**metadata, "feature_file": path.name, "sha256": digest}
        atomic_write(sidecar_path(path), (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
    return digest


def read_features(path: str | os.PathLike) -> np.ndarray:
    return decode(Path(path).read_bytes())


def sidecar_path(path: str | os.PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_sidecar(path: str | os.PathLike) -> dict:
    return json.loads(sidecar_path(path).read_text())
