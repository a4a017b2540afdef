import numpy as np
import pytest
from hypothesis import given, strategies as st

from spandt import dtree, mgraph, spanprog

seeds = st.integers(0, 2**32 - 1)


def rand_binary(seed, n_max=5):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    return dtree.random_binary_tree(n, rng, leaf_prob=0.3, max_depth=n)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_first_marked_dimensions(n):
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(n))
    assert (dg.n_rows, dg.n_cols) == (2 * n + 4, 4 * n + 8)
    assert len(dg.red) == n + 2 and len(dg.black) == n + 2
    assert ("hat", 0) in dg.row and ("zhat", 2 * n) in dg.row


def test_single_query_cycle():
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(1))
    assert [len(c) for c in dg.cycles] == [3]


def test_column_images():
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(2))
    a, b, g = 0.3, 0.8, 0.6
    M = mgraph.assemble_matrix(dg, a, b, g).toarray()
    z0 = dg.row[("z0",)]
    assert M[z0, 0] == a and np.count_nonzero(M[:, 0]) == 1
    for z in dg.tree.leaves:
        col = M[:, dg.leaf_col(z)]
        assert col[dg.row[("v", z)]] == -a and np.count_nonzero(col) == 1
    for col, e, kind in dg.edge_list():
        expect = np.zeros(dg.n_rows)
        if kind == "pseudo":
            expect[e.tail], expect[e.head] = g, g
        else:
            s = b if e.color == dtree.BLACK else g
            expect[e.tail], expect[e.head] = s, -s
        assert np.allclose(M[:, col], expect)


def test_nonpositive_scalar_rejected():
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(2))
    with pytest.raises(ValueError):
        mgraph.assemble_matrix(dg, 0.0, 1.0, 1.0)


def test_nonbinary_rejected():
    t = dtree.random_tree(2, 4, np.random.default_rng(0), leaf_prob=0.0, min_degree=3)
    with pytest.raises(mgraph.GraphError):
        mgraph.build_decision_graph(t)


def _col_of(dg, tail_key, head_key):
    t, h = dg.row[tail_key], dg.row[head_key]
    for col, e, kind in dg.edge_list():
        if kind == "edge" and e.tail == t and e.head == h:
            return col, e
    raise KeyError((tail_key, head_key))


def test_first_marked_availability():
    n = 3
    t = dtree.first_marked_tree(n)
    dg = mgraph.build_decision_graph(t)
    r0, _ = _col_of(dg, ("z0",), ("hat", 0))
    b0, _ = _col_of(dg, ("hat", 0), ("v", 0))
    red_leaf = t.edges[0][0].child if t.edges[0][0].color == dtree.RED else t.edges[0][1].child
    r1, _ = _col_of(dg, ("v", 0), ("v", red_leaf))
    for x in dtree.all_inputs(n):
        m = mgraph.available_columns(dg, x)
        assert m[r0] and m[b0]
        assert m[r1] == (x[0] == 1)
        pseudo = [c for c, _, k in dg.edge_list() if k == "pseudo"]
        assert not m[pseudo].any()


def test_triplets_roundtrip():
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(3))
    M = mgraph.assemble_matrix(dg, 0.3, 0.8, 0.6)
    back = mgraph.load_triplets(mgraph.dump_triplets(M))
    assert (back != M).nnz == 0


@given(seeds, st.booleans())
def test_full_row_rank(seed, pad):
    dg = mgraph.build_decision_graph(rand_binary(seed), pad_pow2=pad)
    M = mgraph.assemble_matrix(dg, 0.3, 0.8, 0.6).toarray()
    assert np.linalg.matrix_rank(M) == dg.n_rows


@given(seeds, st.booleans())
def test_path_correspondence(seed, pad):
    t = rand_binary(seed)
    dg = mgraph.build_decision_graph(t, pad_pow2=pad)
    for x in dtree.all_inputs(t.n):
        assert mgraph.reachable_leaves(dg, x) == [dtree.evaluate(t, x)[0]]


@given(seeds)
def test_witnesses_valid(seed):
    t = rand_binary(seed)
    dg = mgraph.build_decision_graph(t)
    beta, gamma = 0.8, 0.6
    M = mgraph.assemble_matrix(dg, 1.0, beta, gamma).toarray()
    z0 = dg.row[("z0",)]
    for x in dtree.all_inputs(t.n):
        gw = mgraph.graph_witnesses(dg, x, beta, gamma)
        mask = mgraph.available_columns(dg, x)
        assert not np.any(gw.w[~mask])
        target = np.zeros(dg.n_rows)
        target[z0], target[dg.row[("v", gw.leaf)]] = 1, -1
        assert np.abs(M @ gw.w - target).max() < 1e-9
        edge_cols = mask.copy()
        edge_cols[: 1 + len(t.leaves)] = False
        assert np.abs(gw.wbar @ M[:, edge_cols]).max(initial=0) < 1e-9


@given(seeds)
def test_complexity_preservation(seed):
    t = rand_binary(seed)
    st_ = dtree.stats(t)
    w = spanprog.default_weights(t)
    tp, _ = spanprog.max_witness_sizes(spanprog.build_binary_sp(t, w), dtree.all_inputs(t.n))
    dg = mgraph.build_decision_graph(t)
    gp, gn = mgraph.graph_witness_sizes(dg, np.sqrt(w.black), np.sqrt(w.red), dtree.all_inputs(t.n))
    G = max(st_.G, 1)
    assert gp <= tp + (G + 1) / w.black + 2 / w.red + 1e-9
    assert gn <= w.black * (2 * G + 1) + 2 * w.red * st_.T + 4 * w.red * (G + 2) + 1e-9
