"""Versioned ``.npz`` checkpoints.

A checkpoint holds named arrays plus a JSON metadata record under the
reserved key ``__meta__``; the metadata carries the format version, the
model kind and anything needed to rebuild the model (layer specs,
normalization statistics, hyper-parameters).
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_META = "__meta__"


class CheckpointError(ValueError):
    pass


def dumps(meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    if _META in arrays:
        raise CheckpointError(f"array name {_META!r} is reserved")
    record = {"format_version": FORMAT_VERSION, **meta}
    buf = io.BytesIO()
    payload = {k: np.asarray(v) for k, v in sorted(arrays.items())}
    payload[_META] = np.frombuffer(json.dumps(record, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    np.savez(buf, **payload)
    return buf.getvalue()


def loads(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    with np.load(io.BytesIO(blob), allow_pickle=False) as data:
        if _META not in data.files:
            raise CheckpointError("not a checkpoint: metadata record missing")
        meta = json.loads(bytes(data[_META]).decode("utf-8"))
        arrays = {k: data[k] for k in data.files if k != _META}
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version!r}")
    return meta, arrays


def save(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> int:
    """Write a checkpoint; returns its size in bytes."""
    blob = dumps(meta, arrays)
    Path(path).write_bytes(blob)
    return len(blob)


def load(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    return loads(Path(path).read_bytes())
