"""The writer must produce files the pipeline reads back verbatim."""
import numpy as np
import pytest

from hindsight.embed_io import load_vectors, write_vectors as pipeline_write
from hs_embed.vecfile import VectorWriteError, write_vectors


def unit_rows(n, dim, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(n, dim))
    return (rows / np.linalg.norm(rows, axis=1, keepdims=True)).astype(np.float32)


def test_round_trip_through_pipeline_loader(tmp_path):
    ids = ["a", "b", "c"]
    rows = unit_rows(3, 16)
    path = tmp_path / "v.hsve"
    write_vectors(path, ids, rows)
    matrix = load_vectors(path)
    assert matrix.ids == ("a", "b", "c")
    assert matrix.dim == 16
    assert matrix.renormalized == ()
    np.testing.assert_array_equal(matrix.vectors, rows)


def test_byte_identical_to_pipeline_writer(tmp_path):
    ids = [f"doc-{i}" for i in range(9)]
    rows = unit_rows(9, 24, seed=3)
    ours = tmp_path / "ours.hsve"
    theirs = tmp_path / "theirs.hsve"
    write_vectors(ours, ids, rows)
    pipeline_write(ids, rows, 24, theirs)
    assert ours.read_bytes() == theirs.read_bytes()


def test_unicode_ids_survive(tmp_path):
    ids = ["π-doc", "文档"]
    path = tmp_path / "v.hsve"
    write_vectors(path, ids, unit_rows(2, 8))
    assert load_vectors(path).ids == ("π-doc", "文档")


@pytest.mark.parametrize(
    "ids,rows,message",
    [
        (["a", "a"], unit_rows(2, 8), "duplicate"),
        (["a", ""], unit_rows(2, 8), "empty"),
        (["a"], unit_rows(2, 8), "rows for"),
        (["a"], np.zeros((1, 8), dtype=np.float32), "zero vector"),
        (["a"], np.full((1, 8), np.nan, dtype=np.float32), "non-finite"),
        (["a"], np.zeros((1, 0), dtype=np.float32), "dim"),
    ],
)
def test_invalid_input_rejected_without_writing(tmp_path, ids, rows, message):
    path = tmp_path / "v.hsve"
    with pytest.raises(VectorWriteError, match=message):
        write_vectors(path, ids, rows)
    assert not path.exists()
