import numpy as np
import pytest

from omnikit import graph_store
from omnikit.errors import ValidationError
from omnikit.graph_store import (
    load_collection,
    load_matrix,
    make_collection,
    preprocess,
    save_collection,
    save_matrix,
)

PAPER_M4_ALPHA = np.array(
    [
        [2.4259, 0, 1, 0.5741],
        [1, 2.4259, 0, 0.5741],
        [0, 1, 2.4259, 0.5741],
        [0.4259, 0.4259, 0.4259, 2.7222],
    ]
)


def test_load_zero_matrices(tmp_path):
    for k in range(3):
        save_matrix(np.zeros((4, 4)), tmp_path / f"g{k}.csv")
    coll = load_collection(tmp_path)
    assert coll.m == 3
    assert coll.n == 4


def test_load_rejects_asymmetric(tmp_path):
    a = np.zeros((3, 3))
    a[0, 1] = 1.0  # a[1, 0] left 0
    (tmp_path / "bad.csv").write_text("\n".join(",".join(map(str, r)) for r in a))
    with pytest.raises(ValidationError, match="asymmetric"):
        load_collection(tmp_path)


def test_load_rejects_nan(tmp_path):
    (tmp_path / "bad.csv").write_text("0,nan\nnan,0\n")
    with pytest.raises(ValidationError, match="NaN"):
        load_collection(tmp_path)


def test_load_rejects_dimension_mismatch(tmp_path):
    save_matrix(np.zeros((3, 3)), tmp_path / "a.csv")
    save_matrix(np.zeros((4, 4)), tmp_path / "b.csv")
    with pytest.raises(ValidationError, match="dimension mismatch"):
        load_collection(tmp_path)


def test_edge_list_hand_adjacency(tmp_path):
    (tmp_path / "g.edges").write_text("1 2\n2 3\n")
    coll = load_collection(tmp_path, format="edge-list")
    expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    assert coll.n == 3
    np.testing.assert_array_equal(coll.graphs[0], expected)
    assert coll.vertex_ids == ("1", "2", "3")


def test_edge_list_union_vertex_set(tmp_path):
    (tmp_path / "a.edges").write_text("1 2\n")
    (tmp_path / "b.edges").write_text("2 4\n")
    coll = load_collection(tmp_path, format="edge-list")
    assert coll.vertex_ids == ("1", "2", "4")
    assert coll.m == 2
    assert coll.graphs[0][0, 1] == 1.0
    assert coll.graphs[1][1, 2] == 1.0


@pytest.mark.parametrize(
    "matrix",
    [np.eye(3), PAPER_M4_ALPHA],
    ids=["identity", "m4-weights"],
)
def test_dense_csv_roundtrip_exact(tmp_path, matrix):
    path = tmp_path / "x.csv"
    save_matrix(matrix, path)
    back = load_matrix(path)
    assert (back == matrix).all()


def test_dense_csv_roundtrip_random_symmetric(tmp_path):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 10))
    a = a + a.T
    path = tmp_path / "r.csv"
    save_matrix(a, path)
    assert (load_matrix(path) == a).all()


def test_json_tensor_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.random((3, 3, 3))
    save_matrix(t, tmp_path / "c.json", format="json-tensor")
    back = load_matrix(tmp_path / "c.json", format="json-tensor")
    np.testing.assert_array_equal(back, t)


def test_save_rejects_nonfinite(tmp_path):
    with pytest.raises(ValidationError):
        save_matrix(np.array([[0.0, np.inf], [np.inf, 0.0]]), tmp_path / "x.csv")


def test_collection_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    graphs = []
    for _ in range(3):
        a = (rng.random((5, 5)) < 0.4).astype(float)
        a = np.maximum(a, a.T)
        np.fill_diagonal(a, 0)
        graphs.append(a)
    coll = make_collection(graphs)
    save_collection(coll, tmp_path)
    back = load_collection(tmp_path)
    assert back.m == 3
    for a, b in zip(coll.graphs, back.graphs):
        np.testing.assert_array_equal(a, b)


def test_binarize():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 0.7
    coll = make_collection([a])
    out = preprocess(coll, binarize=True)
    assert out.graphs[0][0, 1] == 1.0


def test_drop_isolated():
    a = np.zeros((4, 4))
    a[0, 1] = a[1, 0] = 1.0
    b = np.zeros((4, 4))
    b[0, 2] = b[2, 0] = 1.0
    coll = make_collection([a, b, a])
    out = preprocess(coll, drop_isolated=True)
    # vertex 4 is isolated in every graph, vertex 3 only in two of them
    assert out.n == 3
    assert out.m == 3
    assert out.vertex_ids == ("1", "2", "3")


def test_intersect_vertices_surrogate_count():
    # surrogate of the three-network pipeline: a common core of 422 vertices
    # carries edges in all graphs, the rest only in some
    rng = np.random.default_rng(7)
    n, core = 440, 422
    graphs = []
    for k in range(3):
        a = np.zeros((n, n))
        for v in range(core):
            w = (v + 1 + k) % core
            if w == v:
                w = (v + 2) % core
            a[v, w] = a[w, v] = 1.0
        # extra vertices touch only graph k
        extra = core + k * 6
        for v in range(extra, min(extra + 6, n)):
            a[v, v - 1] = a[v - 1, v] = 1.0
        graphs.append(a)
    out = preprocess(make_collection(graphs), intersect_vertices=True)
    assert out.n == core
    assert out.m == 3


def test_preprocess_idempotent():
    rng = np.random.default_rng(5)
    opts = graph_store.PreprocessOptions(
        binarize=True, symmetrize=True, drop_isolated=True, intersect_vertices=True
    )
    for seed in range(5):
        rng = np.random.default_rng(seed)
        graphs = []
        for _ in range(3):
            a = rng.random((8, 8)) * (rng.random((8, 8)) < 0.3)
            a = np.maximum(a, a.T)
            np.fill_diagonal(a, 0)
            graphs.append(a)
        coll = make_collection(graphs)
        once = preprocess(coll, opts)
        twice = preprocess(once, opts)
        assert once.n == twice.n
        for x, y in zip(once.graphs, twice.graphs):
            np.testing.assert_array_equal(x, y)
        assert once.n <= coll.n
        assert once.m == coll.m


def test_preprocess_can_empty():
    coll = make_collection([np.zeros((3, 3))])
    with pytest.raises(ValidationError, match="every vertex"):
        preprocess(coll, drop_isolated=True)


def test_collection_is_immutable():
    coll = make_collection([np.zeros((3, 3))])
    with pytest.raises(ValueError):
        coll.graphs[0][0, 1] = 1.0


def test_hollow_enforced():
    a = np.eye(3)
    with pytest.raises(ValidationError, match="hollow"):
        make_collection([a])
