"""Exact top-K inner-product retrieval over unit vectors, plus threshold filtering.

The index is a flat scan: similarities are accumulated in double precision
against single-precision stored rows, so rankings near the threshold do not
flip between runs. Ties are broken by ascending paper id for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hindsight.embed_io import EmbeddingMatrix

QUERY_NORM_TOLERANCE = 1e-4


class MatcherError(ValueError):
    """Index construction or query contract violation."""


@dataclass(frozen=True)
class MatchSet:
    """Retained (paper_id, similarity) pairs for one idea, descending by similarity."""

    idea_id: str
    matches: tuple[tuple[str, float], ...]
    k_used: int
    theta_used: float

    def __post_init__(self):
        sims = [s for _, s in self.matches]
        if any(a < b for a, b in zip(sims, sims[1:])):
            raise MatcherError(f"match set for {self.idea_id} not sorted by similarity")
        if any(s < self.theta_used for s in sims):
            raise MatcherError(f"match set for {self.idea_id} contains similarity below theta")
        if len(self.matches) > self.k_used:
            raise MatcherError(f"match set for {self.idea_id} longer than k_used")

    @property
    def paper_ids(self) -> tuple[str, ...]:
        return tuple(pid for pid, _ in self.matches)


class SimilarityIndex:
    """Immutable exact-scan index over an embedding matrix.

    Queries are read-only and safe to run in parallel once built.
    """

    def __init__(self, ids: Sequence[str], vectors: np.ndarray):
        self.ids = tuple(ids)
        self._id_array = np.asarray(self.ids)
        self._vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        self.dim = int(self._vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def top_k(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        return top_k(self, query, k)

    def similarities(self, queries: np.ndarray) -> np.ndarray:
        """Similarity of each query row against every stored vector."""
        q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
        if q.shape[1] != self.dim:
            raise MatcherError(f"query dim {q.shape[1]} does not match index dim {self.dim}")
        return q @ self._vectors.T


def build_index(matrix: EmbeddingMatrix) -> SimilarityIndex:
    """Build the exact flat-scan index; rows must already be unit vectors."""
    if len(matrix) == 0:
        raise MatcherError("cannot build an index over an empty matrix")
    norms = np.linalg.norm(matrix.vectors.astype(np.float64), axis=1)
    bad = np.nonzero(np.abs(norms - 1.0) > QUERY_NORM_TOLERANCE)[0]
    if bad.size:
        raise MatcherError(
            f"row {matrix.ids[int(bad[0])]!r} is not unit-normalized (norm {norms[int(bad[0])]:.6f})"
        )
    return SimilarityIndex(matrix.ids, matrix.vectors)


def top_k(index: SimilarityIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exactly min(k, pool size) results, descending similarity, id-ascending ties."""
    if k < 1:
        raise MatcherError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dim:
        raise MatcherError(f"query dim {q.shape[0]} does not match index dim {index.dim}")
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > QUERY_NORM_TOLERANCE:
        raise MatcherError(f"query is not unit-normalized (norm {norm:.6f})")
    sims = index.similarities(q)[0]
    order = np.lexsort((index._id_array, -sims))
    take = order[: min(k, len(index))]
    return [(str(index._id_array[i]), float(sims[i])) for i in take]


def top_k_batch(index: SimilarityIndex, queries: np.ndarray, k: int) -> list[list[tuple[str, float]]]:
    """top_k for many queries with one matmul; same ordering contract per row."""
    if k < 1:
        raise MatcherError("k must be >= 1")
    q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    norms = np.linalg.norm(q, axis=1)
    bad = np.nonzero(np.abs(norms - 1.0) > QUERY_NORM_TOLERANCE)[0]
    if bad.size:
        raise MatcherError(f"query row {int(bad[0])} is not unit-normalized")
    sims = index.similarities(q)
    take_n = min(k, len(index))
    results = []
    for row in sims:
        order = np.lexsort((index._id_array, -row))[:take_n]
        results.append([(str(index._id_array[i]), float(row[i])) for i in order])
    return results


def filter_matches(
    ranked: Sequence[tuple[str, float]],
    theta: float,
    idea_id: str,
    k: int | None = None,
) -> MatchSet:
    """Keep ranked entries with similarity >= theta (inclusive)."""
    sims = [s for _, s in ranked]
    if any(a < b for a, b in zip(sims, sims[1:])):
        raise MatcherError("ranked input must be sorted by descending similarity")
    kept = tuple((pid, float(sim)) for pid, sim in ranked if sim >= theta)
    return MatchSet(
        idea_id=idea_id,
        matches=kept,
        k_used=len(ranked) if k is None else k,
        theta_used=float(theta),
    )
