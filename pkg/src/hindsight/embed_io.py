"""Id-aligned binary vector file format and normalization on load.

Layout (little-endian): magic ``HSVE``, format version u16, dim u32,
count u64, then count x dim float32 rows, then one length-prefixed UTF-8
id per row (u32 length + bytes) in row order. This file is the handoff
between the pipeline and the document encoder sidecar.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"HSVE"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHIQ")

# stored rows further than this from unit norm are renormalized and reported
RENORM_TOLERANCE = 1e-3
# below this the row is considered a zero vector (encoder failure upstream)
ZERO_NORM = 1e-12


class VectorFormatError(ValueError):
    """Malformed vector file or inconsistent matrix input."""


@dataclass
class EmbeddingMatrix:
    """Unit row vectors aligned to document ids, one row per id."""

    dim: int
    ids: tuple[str, ...]
    vectors: np.ndarray  # float32, shape (len(ids), dim)
    renormalized: tuple[str, ...] = ()

    def __post_init__(self):
        if self.vectors.shape != (len(self.ids), self.dim):
            raise VectorFormatError(
                f"vector array shape {self.vectors.shape} does not match "
                f"{len(self.ids)} ids x dim {self.dim}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise VectorFormatError("duplicate ids in embedding matrix")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def id_to_row(self) -> dict[str, int]:
        cached = getattr(self, "_id_to_row", None)
        if cached is None:
            cached = {doc_id: i for i, doc_id in enumerate(self.ids)}
            object.__setattr__(self, "_id_to_row", cached)
        return cached

    def row(self, doc_id: str) -> np.ndarray:
        return self.vectors[self.id_to_row[doc_id]]


def write_vectors(ids: Sequence[str], vectors, dim: int, path: Path | str):
    """Write rows to the binary vector format; validates before any bytes hit disk."""
    ids = list(ids)
    rows = [np.asarray(r) for r in vectors]
    if len(rows) != len(ids):
        raise VectorFormatError(f"{len(rows)} rows for {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise VectorFormatError("duplicate ids")
    for doc_id, row in zip(ids, rows):
        if row.shape != (dim,):
            raise VectorFormatError(
                f"row for {doc_id!r} has shape {row.shape}, expected ({dim},)"
            )
    payload = (
        np.vstack(rows).astype("<f4") if rows else np.zeros((0, dim), dtype="<f4")
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, len(ids)))
        fh.write(payload.tobytes(order="C"))
        for doc_id in ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_vectors(path: Path | str) -> EmbeddingMatrix:
    """Read a vector file and L2-normalize every row.

    Rows whose stored norm deviates from 1 by more than ``RENORM_TOLERANCE``
    are renormalized and listed in ``matrix.renormalized``; a zero row is a
    hard error naming its id.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise VectorFormatError(f"{path}: truncated header at byte offset {len(blob)}")
    magic, version, dim, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise VectorFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VectorFormatError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise VectorFormatError(f"{path}: dim must be positive")

    offset = _HEADER.size
    payload_bytes = count * dim * 4
    if len(blob) < offset + payload_bytes:
        raise VectorFormatError(
            f"{path}: truncated payload at byte offset {len(blob)} "
            f"(expected {offset + payload_bytes} bytes)"
        )
    raw = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset)
    vectors = raw.reshape(count, dim).copy()
    offset += payload_bytes

    ids: list[str] = []
    for _ in range(count):
        if len(blob) < offset + 4:
            raise VectorFormatError(f"{path}: truncated id block at byte offset {offset}")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if len(blob) < offset + length:
            raise VectorFormatError(f"{path}: truncated id block at byte offset {offset}")
        ids.append(blob[offset:offset + length].decode("utf-8"))
        offset += length
    if offset != len(blob):
        raise VectorFormatError(f"{path}: {len(blob) - offset} trailing bytes at offset {offset}")

    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    zero_rows = np.nonzero(norms < ZERO_NORM)[0]
    if zero_rows.size:
        raise VectorFormatError(f"{path}: zero vector for id {ids[int(zero_rows[0])]!r}")
    renormalized = tuple(
        ids[int(i)] for i in np.nonzero(np.abs(norms - 1.0) > RENORM_TOLERANCE)[0]
    )
    vectors = (vectors.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(dim=int(dim), ids=tuple(ids), vectors=vectors,
                           renormalized=renormalized)


@dataclass
class Alignment:
    """Pairing of records to matrix rows; nothing is dropped silently."""

    pairs: dict[str, int] = field(default_factory=dict)  # record id -> row index
    orphan_rows: tuple[str, ...] = ()
    orphan_records: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return not self.orphan_rows and not self.orphan_records


def _record_id(record) -> str:
    if isinstance(record, str):
        return record
    for attr in ("paper_id", "idea_id"):
        value = getattr(record, attr, None)
        if value is not None:
            return value
    raise TypeError(f"cannot extract a document id from {type(record).__name__}")


def align(matrix: EmbeddingMatrix, records: Iterable) -> Alignment:
    """Pair each record with its matrix row; remainders are listed, never dropped."""
    record_ids = [_record_id(r) for r in records]
    row_of = matrix.id_to_row
    pairs: dict[str, int] = {}
    orphan_records: list[str] = []
    for rid in record_ids:
        if rid in row_of:
            pairs[rid] = row_of[rid]
        else:
            orphan_records.append(rid)
    paired = set(pairs)
    orphan_rows = tuple(i for i in matrix.ids if i not in paired)
    return Alignment(pairs=pairs, orphan_rows=orphan_rows,
                     orphan_records=tuple(orphan_records))
