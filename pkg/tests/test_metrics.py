import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mem3d.errors import DataError
from mem3d.geometry import PointCloud
from mem3d.metrics import (
    EmbeddingSet,
    aggregate_view_embeddings,
    chamfer_distance,
    chamfer_distance_brute,
    embedding_distance,
)


def test_chamfer_single_points():
    assert chamfer_distance([[0, 0, 0]], [[1, 0, 0]]) == 2.0


def test_chamfer_small_sets():
    # each point of {(0,0,0),(2,0,0)} is 1 away in square from (1,0,0)
    assert chamfer_distance([[0, 0, 0], [2, 0, 0]], [[1, 0, 0]]) == 2.0
    assert chamfer_distance(np.zeros((5, 3)), np.zeros((7, 3))) == 0.0


def test_chamfer_accepts_point_clouds():
    a = PointCloud(np.random.default_rng(0).random((100, 3)))
    assert chamfer_distance(a, a) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300), st.integers(1, 300))
def test_accelerated_matches_brute_force(seed, n, m):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
    assert abs(chamfer_distance(a, b) - chamfer_distance_brute(a, b)) <= 1e-9
    assert chamfer_distance(a, b) == chamfer_distance(b, a)


def test_chamfer_rejects_bad_clouds():
    with pytest.raises(DataError, match="empty"):
        chamfer_distance(np.zeros((0, 3)), np.zeros((3, 3)))
    with pytest.raises(DataError):
        chamfer_distance(np.zeros((3, 2)), np.zeros((3, 2)))


def test_embedding_distance_examples():
    assert embedding_distance([1, 0], [3, 0]) == 0.0
    assert embedding_distance([1, 0], [0, 2]) == 1.0
    assert embedding_distance([1, 0], [-5, 0]) == 2.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 64))
def test_embedding_distance_range_and_symmetry(seed, dim):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=dim), rng.normal(size=dim)
    d = embedding_distance(a, b)
    assert 0.0 <= d <= 2.0
    assert d == pytest.approx(embedding_distance(b, a), abs=1e-15)


def test_embedding_distance_errors():
    with pytest.raises(DataError, match="mismatch"):
        embedding_distance([1, 0], [1, 0, 0])
    with pytest.raises(DataError, match="zero"):
        embedding_distance([0, 0], [1, 0])


def test_aggregate_views():
    np.testing.assert_allclose(aggregate_view_embeddings([[1, 0], [0, 1]]), [2**-0.5, 2**-0.5])
    np.testing.assert_array_equal(aggregate_view_embeddings([[0, 3]]), [0, 1])
    with pytest.raises(DataError):
        aggregate_view_embeddings([[1, 0], [-1, 0]])
    with pytest.raises(DataError):
        aggregate_view_embeddings(np.zeros((0, 4)))


def test_embedding_set_validation_and_views():
    s = EmbeddingSet(("b", "a"), np.array([[0.0, 2.0], [3.0, 0.0]]))
    assert s.dim == 2 and len(s) == 2
    np.testing.assert_array_equal(s.unit(), [[0, 1], [1, 0]])
    np.testing.assert_array_equal(s.sorted_values(), [[3, 0], [0, 2]])
    assert s.subset(["a"]).ids == ("a",)
    with pytest.raises(DataError, match="no embedding"):
        s.subset(["zz"])
    with pytest.raises(DataError, match="duplicate"):
        EmbeddingSet(("a", "a"), np.zeros((2, 2)))
    with pytest.raises(DataError):
        EmbeddingSet(("a",), np.zeros((2, 2)))
    with pytest.raises(DataError, match="non-finite"):
        EmbeddingSet(("a",), np.array([[np.nan, 1.0]]))
