import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spandt import dtree, problems as P, qsim

EPS = 0.05


def graph(n, edges1):
    return P.Graph.from_edges(n, [(u - 1, v - 1) for u, v in edges1])


# -- parsing ---------------------------------------------------------------------

def test_parse_matrix_and_edges():
    a = P.parse_graph("3\n0 1 0\n1 0 1\n0 1 0\n")
    b = P.parse_graph("3 2\n1 2\n2 3\n")
    assert a == b == P.path_graph(3)


@pytest.mark.parametrize("text", [
    "3\n0 1\n1 0\n", "2\n1 1\n1 0\n", "2\n0 1\n0 0\n", "3 1\n1 1\n", "3 1\n1 4\n", "x\n", "",
])
def test_parse_rejects(text):
    with pytest.raises(P.GraphFormatError):
        P.parse_graph(text)


def test_to_input_is_row_major():
    g = P.path_graph(3)
    x = g.to_input()
    assert len(x) == 9 and x[0 * 3 + 1] == x[1 * 3 + 0] == 1 and x[0 * 3 + 2] == 0


# -- classical references ------------------------------------------------------------

def test_classical_examples():
    assert P.classical_reference("bfs", P.path_graph(3)) == ((1, 2), (2, 3))
    assert P.classical_reference("bipartite", P.cycle_graph(5)) is False
    assert P.classical_reference("bipartite", P.cycle_graph(4)) is True
    assert P.classical_reference("first-marked", (0, 0, 1, 0)) == 3
    assert P.classical_reference("matching", graph(2, [(1, 2)])) == ((1, 2),)
    assert len(P.classical_reference("matching", graph(4, [(1, 2), (1, 3), (1, 4)]))) == 1
    assert P.has_cycle(P.cycle_graph(3)) and not P.has_cycle(P.path_graph(4))
    with pytest.raises(ValueError):
        P.classical_reference("sorting", P.path_graph(2))


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_greedy_is_maximal(n, seed):
    g = P.random_graph(n, 0.5, np.random.default_rng(seed))
    assert P.is_maximal_matching(g, P.greedy_matching(g))


# -- lazy trees ----------------------------------------------------------------------

def evaluate_lazy(lz, x):
    s, tr = lz.evaluate(x)
    return lz.output(s), tr


@pytest.mark.parametrize("mk", [P.bfs_tree, P.bipartiteness, P.cycle_detect])
def test_bfs_path_graph(mk):
    lz = mk(3)
    out, tr = evaluate_lazy(lz, P.path_graph(3).to_input())
    if mk is P.bfs_tree:
        assert out == ((1, 2), (2, 3))
    assert sum(c == dtree.RED for *_, c in tr) >= 2


def test_bfs_empty_graph_all_black():
    lz = P.bfs_tree(4)
    out, tr = evaluate_lazy(lz, P.Graph.from_edges(4, []).to_input())
    assert out == () and all(c == dtree.BLACK for *_, c in tr)


def test_bipartite_cycles():
    lz = P.bipartiteness(4)
    assert evaluate_lazy(P.bipartiteness(3), P.cycle_graph(3).to_input())[0] is False
    assert evaluate_lazy(lz, P.cycle_graph(4).to_input())[0] is True


def test_matching_examples():
    assert evaluate_lazy(P.maximal_matching_tree(2), graph(2, [(1, 2)]).to_input())[0] == ((1, 2),)
    star = graph(4, [(1, 2), (1, 3), (1, 4)])
    assert len(evaluate_lazy(P.maximal_matching_tree(4), star.to_input())[0]) == 1


@pytest.mark.parametrize("mk,n", [(P.bfs_tree, 5), (P.bipartiteness, 5), (P.cycle_detect, 5),
                                  (P.maximal_matching_tree, 5)])
def test_lazy_matches_oracle_random(mk, n, rng):
    lz = mk(n)
    problem = {"bfs": "bfs", "bipartite": "bipartite", "cycle": "cycle"}.get(getattr(lz, "mode", ""), "matching")
    for _ in range(30):
        g = P.random_graph(n, 0.4, rng)
        out, tr = evaluate_lazy(lz, g.to_input())
        assert out == P.classical_reference(problem, g)
        assert len(tr) <= n * n + n * n   # scan phase at most doubles the query count
        if problem == "bfs":
            assert sum(c == dtree.RED for *_, c in tr) <= n - 1


@pytest.mark.parametrize("problem,n", [("bfs", 3), ("bipartite", 3), ("cycle", 3), ("matching", 3),
                                       ("bfs", 4)])
def test_lazy_consistent_with_materialized(problem, n):
    fe = P.frontend(problem, n)
    lz, mat = fe.lazy, fe.materialized
    t = mat.tree
    for v in range(len(t)):
        s = mat.states[v]
        lv = lz.local(s)
        assert lv.kind == dtree.local(t, v).kind
        if t.is_leaf(v):
            assert lv.query is None
        else:
            assert lv.query == t.query[v]
            lazy_kids = {c: (lab, col) for c, lab, col in lv.children}
            tree_kids = {mat.states[e.child]: (e.label, e.color) for e in t.edges[v]}
            assert lazy_kids == tree_kids
        if t.parent[v] is not None:
            assert lv.parent == mat.states[t.parent[v]]
            assert lv.parent_color == t.parent_color[v]
        if t.is_leaf(v) and t.parent_color[v] == dtree.RED:
            with pytest.raises(dtree.BlackPathError):
                lz.black_path(s)
            continue
        length = dtree.black_path(t, v)
        assert lz.black_path(s) == length
        for k in range(1, length + 1):
            assert lz.black_path(s, k) == mat.states[dtree.black_path(t, v, k)]


@pytest.mark.parametrize("problem", ["bfs", "bipartite", "cycle"])
def test_black_runs_keep_lists(problem):
    fe = P.frontend(problem, 3)
    for s in fe.materialized.states:
        if fe.lazy.query(s) is None:
            continue
        c = fe.lazy.advance(s)
        assert (c.L, c.Q, c.ES) == (s.L, s.Q, s.ES)


@pytest.mark.parametrize("mk", [P.bfs_tree, P.bipartiteness, P.maximal_matching_tree])
def test_subroutine_cost_flat_in_n(mk):
    worst = {}
    for n in (3, 6, 9):
        lz, rng, top = mk(n), np.random.default_rng(n), 0
        for _ in range(5):
            x = P.random_graph(n, 0.4, rng).to_input()
            s = lz.root()
            while lz.query(s) is not None:
                lz.ops.reset()
                lz.local(s)
                length = lz.black_path(s)
                lz.black_path(s, length)
                top = max(top, lz.ops.total)
                s = lz.take(s) if lz.useful(s) and x[lz.query(s)] else lz.advance(s)
        worst[n] = top
    # a constant number of pointer reads/writes, independent of n
    assert max(worst.values()) <= 1.1 * min(worst.values())


def test_tree_stats():
    st_ = dtree.stats(P.frontend("matching", 3).tree)
    assert st_.T == 9 and st_.G <= 3 // 2 + 1
    st_b = dtree.stats(P.frontend("bfs", 4).tree)
    assert st_b.T == 16 and st_b.G <= 3


def test_materialize_limit():
    with pytest.raises(MemoryError):
        P.bfs_tree(4).materialize(limit=100)


def test_small_n_rejected():
    with pytest.raises(ValueError):
        P.bfs_tree(1)
    with pytest.raises(ValueError):
        P.frontend("sorting", 3)


# -- end to end ----------------------------------------------------------------------

@pytest.mark.parametrize("problem,n", [("first-marked", 5), ("bfs", 3), ("cycle", 4), ("matching", 3)])
def test_quantum_matches_oracle(problem, n):
    fe = P.frontend(problem, n)
    inst = qsim.compile_instance(fe.tree, EPS, xs=fe.domain_inputs())
    for g, x in fe.domain:
        rep = qsim.run(inst, x)
        assert fe.decode(rep.top_answer) == fe.reference(g)
        assert rep.success >= 1 - 16 * EPS**2


def test_quantum_bfs_random_n4(rng):
    fe = P.frontend("bfs", 4)
    inst = qsim.compile_instance(fe.tree, EPS, xs=fe.domain_inputs())
    for _ in range(30):
        g = P.random_graph(4, 0.5, rng)
        rep = qsim.run(inst, g.to_input())
        assert fe.decode(rep.top_answer) == P.bfs_forest(g) and rep.success >= 2 / 3
