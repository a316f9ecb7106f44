import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hindsight.embed_io import EmbeddingMatrix
from hindsight.matcher import (
    MatcherError,
    MatchSet,
    build_index,
    filter_matches,
    top_k,
    top_k_batch,
)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def matrix_of(ids, rows):
    rows = np.asarray(rows, dtype=np.float32)
    return EmbeddingMatrix(dim=rows.shape[1], ids=tuple(ids), vectors=rows)


def random_matrix(n, dim, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, dim))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return matrix_of([f"p{i:04d}" for i in range(n)], m)


def brute_force(index_matrix, query, k):
    """Double-precision reference: full scan, sort by (-sim, id)."""
    sims = index_matrix.vectors.astype(np.float64) @ np.asarray(query, dtype=np.float64)
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], index_matrix.ids[i]))
    return [(index_matrix.ids[i], sims[i]) for i in order[:k]]


def test_matches_brute_force_on_random_vectors():
    m = random_matrix(300, 32, seed=42)
    index = build_index(m)
    rng = np.random.default_rng(7)
    for _ in range(20):
        q = unit(rng.normal(size=32))
        got = top_k(index, q, 10)
        want = brute_force(m, q, 10)
        assert [pid for pid, _ in got] == [pid for pid, _ in want]
        for (_, s_got), (_, s_want) in zip(got, want):
            assert s_got == pytest.approx(s_want, abs=1e-6)


def test_exact_similarity_ties_break_by_ascending_id():
    # two papers identical to the query, plus one orthogonal
    rows = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    m = matrix_of(["zz", "aa", "bb"], rows)
    index = build_index(m)
    got = top_k(index, np.array([1.0, 0.0]), 3)
    assert [pid for pid, _ in got] == ["aa", "zz", "bb"]


def test_k_larger_than_pool_returns_pool_size():
    m = random_matrix(5, 8, seed=0)
    index = build_index(m)
    got = top_k(index, unit(np.ones(8)), 20)
    assert len(got) == 5


def test_k_must_be_positive():
    index = build_index(random_matrix(3, 4, seed=1))
    with pytest.raises(MatcherError):
        top_k(index, unit(np.ones(4)), 0)


def test_dimension_mismatch_rejected():
    index = build_index(random_matrix(3, 4, seed=1))
    with pytest.raises(MatcherError, match="dim"):
        top_k(index, unit(np.ones(5)), 2)


def test_unnormalized_query_rejected():
    index = build_index(random_matrix(3, 4, seed=1))
    with pytest.raises(MatcherError, match="norm"):
        top_k(index, np.array([2.0, 0.0, 0.0, 0.0]), 2)


def test_empty_index_rejected():
    with pytest.raises(MatcherError):
        build_index(matrix_of([], np.zeros((0, 4), dtype=np.float32)))


def test_batch_equals_single_queries():
    m = random_matrix(100, 16, seed=3)
    index = build_index(m)
    rng = np.random.default_rng(11)
    queries = rng.normal(size=(8, 16))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    batched = top_k_batch(index, queries, 5)
    for row, q in zip(batched, queries):
        single = top_k(index, q, 5)
        assert [pid for pid, _ in row] == [pid for pid, _ in single]
        # gemm vs gemv accumulation may differ in the last ulp
        for (_, s_batch), (_, s_single) in zip(row, single):
            assert s_batch == pytest.approx(s_single, abs=1e-12)


def test_results_sorted_descending():
    m = random_matrix(50, 8, seed=9)
    index = build_index(m)
    got = top_k(index, unit(np.ones(8)), 50)
    sims = [s for _, s in got]
    assert sims == sorted(sims, reverse=True)


# ---------------------------------------------------------------------------
# threshold filtering


def ranked_fixture():
    return [("a", 0.99), ("b", 0.97), ("c", 0.96), ("d", 0.90)]


def test_filter_keeps_at_threshold():
    ms = filter_matches(ranked_fixture(), theta=0.96, idea_id="i")
    assert ms.paper_ids == ("a", "b", "c")  # 0.96 itself is kept


def test_filter_empty_when_theta_above_all():
    ms = filter_matches(ranked_fixture(), theta=0.999, idea_id="i")
    assert ms.matches == ()


def test_filter_requires_sorted_input():
    with pytest.raises(MatcherError, match="sorted"):
        filter_matches([("a", 0.5), ("b", 0.9)], theta=0.1, idea_id="i")


def test_matchset_invariants():
    with pytest.raises(MatcherError):
        MatchSet(idea_id="i", matches=(("a", 0.5), ("b", 0.9)), k_used=5, theta_used=0.1)
    with pytest.raises(MatcherError):
        MatchSet(idea_id="i", matches=(("a", 0.5),), k_used=5, theta_used=0.9)
    with pytest.raises(MatcherError):
        MatchSet(idea_id="i", matches=(("a", 0.9), ("b", 0.8)), k_used=1, theta_used=0.5)


@given(
    theta1=st.floats(min_value=-1.0, max_value=1.0),
    theta2=st.floats(min_value=-1.0, max_value=1.0),
    seed=st.integers(min_value=0, max_value=999),
)
@settings(max_examples=80, deadline=None)
def test_match_set_inclusion_is_monotone_in_theta(theta1, theta2, seed):
    lo, hi = sorted((theta1, theta2))
    rng = np.random.default_rng(seed)
    sims = np.sort(rng.uniform(-1, 1, size=10))[::-1]
    ranked = [(f"p{i}", float(s)) for i, s in enumerate(sims)]
    at_hi = set(filter_matches(ranked, hi, "i").paper_ids)
    at_lo = set(filter_matches(ranked, lo, "i").paper_ids)
    assert at_hi <= at_lo
