"""``SPLF1`` feature files.

Binary part (little-endian): ``b"SPLF1"``, u16 version (=1), u64 rows,
u32 dim, then ``rows * dim`` float32 values row-major. A JSON sidecar
(``<file>.json``) carries the schema and per-row provenance.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model_io import atomic_write

MAGIC = b"SPLF1"
VERSION = 1
HEADER = struct.Struct("<5sHQI")


def write_features(path, matrix: np.ndarray, sidecar: dict) -> None:
    matrix = np.asarray(matrix)
    rows, dim = matrix.shape
    data = HEADER.pack(MAGIC, VERSION, rows, dim) + np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    atomic_write(path, data)
    side = Path(str(path) + ".json")
    atomic_write(side, (json.dumps(sidecar, indent=1, sort_keys=True) + "\n").encode())


def read_features(path):
    """Return ``(matrix float32 (rows, dim), sidecar dict or None)``."""
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise FormatError("feature file is truncated")
    magic, version, rows, dim = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("not an SPLF1 feature file")
    if version != VERSION:
        raise FormatError(f"unsupported SPLF1 version {version}")
    if len(data) != HEADER.size + 4 * rows * dim:
        raise FormatError("feature file length does not match its header")
    matrix = np.frombuffer(data, dtype="<f4", offset=HEADER.size).reshape(rows, dim)
    side = Path(str(path) + ".json")
    sidecar = json.loads(side.read_text()) if side.exists() else None
    return matrix, sidecar


def table_sidecar(table) -> dict:
    return {
        "schema": table.schema.to_dict(),
        "images": [{"image_id": i, "label": int(l)} for i, l in zip(table.image_ids, table.image_label)],
        "rows": {
            "image": table.image_of.tolist(),
            "x0": table.x0.tolist(),
            "y0": table.y0.tolist(),
            "label": table.patch_label.tolist(),
            "augmented": table.augmented.astype(int).tolist(),
        },
    }
