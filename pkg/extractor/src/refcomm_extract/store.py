"""Writer for the refcomm embedding-store wire format.

Layout (little-endian): magic ``EMB1``, version u16, dim u32, count u64,
name length u16 + UTF-8 architecture name, then per record image_id u64,
class_id u32 and dim float32 values. Manifest sidecar: same basename with
``.manifest.json``. Implemented here independently of the refcomm package;
the format is the interface between the two.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import VerifyError

MAGIC = b"EMB1"
FORMAT_VERSION = 1
UNLABELED = 0xFFFFFFFF

_HEADER = struct.Struct("<4sHIQH")


def manifest_path(path) -> Path:
    return Path(path).with_suffix(".manifest.json")


def write_store(path, architecture_name: str, vectors: np.ndarray,
                image_ids: np.ndarray, class_ids: np.ndarray,
                manifest: dict | None = None) -> None:
    path = Path(path)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    n, dim = vectors.shape
    name = architecture_name.encode("utf-8")
    rec = np.empty(
        n, dtype=[("image_id", "<u8"), ("class_id", "<u4"), ("vector", "<f4", (dim,))]
    )
    rec["image_id"] = np.asarray(image_ids, dtype=np.uint64)
    rec["class_id"] = np.asarray(class_ids, dtype=np.uint32)
    rec["vector"] = vectors
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, dim, n, len(name))
    path.write_bytes(header + name + rec.tobytes())
    if manifest is not None:
        manifest_path(path).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )


def read_store_header(path):
    """Parse header fields; used by verify (full reads go through refcomm)."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise VerifyError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, dim, count, name_len = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise VerifyError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VerifyError(f"{path}: unsupported version {version}")
    offset = _HEADER.size
    if len(blob) < offset + name_len:
        raise VerifyError(f"{path}: truncated architecture name")
    name = blob[offset:offset + name_len].decode("utf-8")
    offset += name_len
    expected = offset + (12 + 4 * dim) * count
    if len(blob) != expected:
        raise VerifyError(
            f"{path}: expected {expected} bytes for {count} records of dim "
            f"{dim}, found {len(blob)}"
        )
    records = np.frombuffer(
        blob,
        dtype=[("image_id", "<u8"), ("class_id", "<u4"), ("vector", "<f4", (dim,))],
        count=count, offset=offset,
    )
    return {
        "architecture_name": name,
        "dim": int(dim),
        "count": int(count),
        "image_ids": records["image_id"].copy(),
        "class_ids": records["class_id"].copy(),
        "vectors": np.ascontiguousarray(records["vector"]),
    }
