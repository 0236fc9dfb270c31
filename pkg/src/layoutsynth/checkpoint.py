"""Checkpoint archives: metadata JSON plus named weight tensors in one file.

Layout (a ZIP with fixed timestamps and no compression, so that identical
contents produce identical bytes):

    archive.json   {"format": "layoutsynth-archive", "version": 1,
                    "kind": "<artifact kind>", "meta": {...},
                    "tensors": [{"name", "dtype", "shape"}, ...]}
    tensors.bin    tensor payloads concatenated in listed order,
                   little-endian, C-contiguous

Tensor names are sorted, dtypes restricted to the table below. Weight hashes
are SHA-256 over (name, dtype, shape, bytes) in name order, so a model keeps
its hash across save/load round trips.
"""

from __future__ import annotations

import hashlib
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

_DTYPES = {
    "f32": np.float32,
    "f64": np.float64,
    "i64": np.int64,
    "i32": np.int32,
    "u8": np.uint8,
}
_DTYPE_NAMES = {np.dtype(v): k for k, v in _DTYPES.items()}

# Fixed DOS timestamp keeps archive bytes reproducible.
_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class Archive:
    kind: str
    meta: dict
    tensors: dict[str, np.ndarray]


def _canonical(tensors: dict[str, np.ndarray]) -> list[tuple[str, np.ndarray]]:
    out = []
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        # ascontiguousarray promotes 0-d arrays to (1,); keep the true shape
        arr = np.ascontiguousarray(arr).reshape(arr.shape)
        if arr.dtype not in _DTYPE_NAMES:
            raise InputError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        out.append((name, arr))
    return out


def tensors_digest(tensors: dict[str, np.ndarray], extra: str = "") -> str:
    """SHA-256 over named tensors; ``extra`` mixes in structural metadata."""
    h = hashlib.sha256()
    h.update(extra.encode())
    for name, arr in _canonical(tensors):
        h.update(f"{name}|{_DTYPE_NAMES[arr.dtype]}|{arr.shape}|".encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def save_archive(path: str | Path, kind: str, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    entries = _canonical(tensors)
    index = {
        "format": "layoutsynth-archive",
        "version": 1,
        "kind": kind,
        "meta": meta,
        "tensors": [
            {"name": n, "dtype": _DTYPE_NAMES[a.dtype], "shape": list(a.shape)}
            for n, a in entries
        ],
    }
    payload = b"".join(a.tobytes() for _, a in entries)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, data in (
            ("archive.json", json.dumps(index, sort_keys=True).encode()),
            ("tensors.bin", payload),
        ):
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            zf.writestr(info, data)


def load_archive(path: str | Path) -> Archive:
    path = Path(path)
    try:
        with zipfile.ZipFile(path, "r") as zf:
            index = json.loads(zf.read("archive.json"))
            payload = zf.read("tensors.bin")
    except (zipfile.BadZipFile, KeyError) as exc:
        raise InputError(f"{path}: not a layoutsynth archive ({exc})") from exc
    if index.get("format") != "layoutsynth-archive":
        raise InputError(f"{path}: unrecognized archive format")
    tensors = {}
    offset = 0
    for spec in index["tensors"]:
        dtype = _DTYPES[spec["dtype"]]
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * np.dtype(dtype).itemsize
        raw = payload[offset : offset + nbytes]
        if len(raw) != nbytes:
            raise InputError(f"{path}: truncated tensor payload for {spec['name']!r}")
        tensors[spec["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise InputError(f"{path}: trailing bytes in tensor payload")
    return Archive(kind=index["kind"], meta=index["meta"], tensors=tensors)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_digest(obj) -> str:
    """Stable hash of a JSON-serializable configuration object."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()
