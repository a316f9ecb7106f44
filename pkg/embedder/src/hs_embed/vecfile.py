"""Writer for the id-aligned binary vector format.

This file layout is the contract with the evaluation pipeline, implemented
here independently of the pipeline's own reader: little-endian magic
``HSVE``, format version u16, dim u32, count u64, then count x dim float32
rows, then one u32-length-prefixed UTF-8 id per row in row order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"HSVE"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHIQ")


class VectorWriteError(ValueError):
    """Rows and ids that cannot form a valid vector file."""


def write_vectors(path: Path | str, ids: Sequence[str], rows: np.ndarray) -> None:
    """Validate and write; a failed validation leaves no file behind."""
    ids = list(ids)
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise VectorWriteError(f"expected a 2-D row matrix, got shape {rows.shape}")
    if rows.shape[0] != len(ids):
        raise VectorWriteError(f"{rows.shape[0]} rows for {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise VectorWriteError("duplicate document ids")
    for doc_id in ids:
        if not doc_id:
            raise VectorWriteError("empty document id")
    if rows.shape[1] == 0:
        raise VectorWriteError("dim must be positive")
    if not np.all(np.isfinite(rows)):
        raise VectorWriteError("non-finite values in vector rows")
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    dead = np.nonzero(norms < 1e-12)[0]
    if dead.size:
        raise VectorWriteError(f"zero vector for id {ids[int(dead[0])]!r}")

    payload = np.ascontiguousarray(rows, dtype="<f4")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, rows.shape[1], len(ids)))
        fh.write(payload.tobytes(order="C"))
        for doc_id in ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
