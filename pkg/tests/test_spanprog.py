import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spandt import dtree, spanprog

seeds = st.integers(0, 2**32 - 1)


def rand_binary(seed, n_max=5):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    return dtree.random_binary_tree(n, rng, leaf_prob=0.3, max_depth=n)


def path_enumeration_witness(sp_, x):
    """Oracle: follow the transcript, weight each traversed column by 1/sqrt(W)."""
    t = sp_.tree
    w = np.zeros(sp_.A.shape[1])
    v = t.root
    while not t.is_leaf(v):
        for c, (tail, head) in enumerate(sp_.col_edge):
            if tail == v and x[t.query[v]] in sp_.rule[c][1]:
                color = t.parent_color[head]
                weight = sp_.weights.black if color == dtree.BLACK else sp_.weights.red
                w[c] = weight ** -0.5
                v = head
                break
    return w


def test_default_weights_first_marked():
    w = spanprog.default_weights(dtree.first_marked_tree(2))
    assert w.black == 1.0 and w.red == 0.5


def test_black_column_shape():
    t = dtree.first_marked_tree(3)
    sp_ = spanprog.build_binary_sp(t, spanprog.Weights(0.7, 0.2))
    A = sp_.A.toarray()
    for c, (v, child) in enumerate(sp_.col_edge):
        expect = np.zeros(len(t))
        s = np.sqrt(0.7 if t.parent_color[child] == dtree.BLACK else 0.2)
        expect[v], expect[child] = s, -s
        assert np.allclose(A[:, c], expect)


def test_first_marked_all_zero_positive_size():
    sp_ = spanprog.build_binary_sp(dtree.first_marked_tree(3))
    wp = spanprog.witnesses(sp_, (0, 0, 0))
    assert wp.wsize_pos == pytest.approx(3.0)


def test_verify_first_marked_exhaustive():
    sp_ = spanprog.build_binary_sp(dtree.first_marked_tree(3))
    rep = spanprog.verify_span_program(sp_)
    assert rep.ok and rep.n_inputs == 8 and not rep.failures


def test_nonbinary_tree_rejected():
    rng = np.random.default_rng(1)
    t = dtree.random_tree(2, 4, rng, leaf_prob=0.0, min_degree=3)
    with pytest.raises(spanprog.UnsupportedTree):
        spanprog.build_binary_sp(t)


def test_broken_program_reported():
    t = dtree.first_marked_tree(2)
    sp_ = spanprog.build_binary_sp(t)
    # make every column free: targets of other leaves become reachable
    bad = spanprog.SpanProgram("binary", t, sp_.weights, sp_.A, [spanprog.FREE] * len(sp_.rule),
                               sp_.col_edge)
    rep = spanprog.verify_span_program(bad)
    assert not rep.ok and rep.failures
    with pytest.raises(spanprog.SpanProgramViolation):
        rep.raise_if_failed()


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        spanprog.Weights(0.0, 1.0)


def test_nbsp_hash_column_image():
    rng = np.random.default_rng(3)
    t = dtree.random_tree(3, 4, rng, leaf_prob=0.2)
    sp_ = spanprog.build_nbsp(t)
    for v in t.internal:
        col = sp_.A_hat[:, sp_.hat_index[("#", v)]]
        expect = np.zeros(len(t))
        expect[v] = 1
        for e in t.edges[v]:
            expect[e.child] -= 1
        assert np.allclose(col, expect)


def test_nbsp_degree_one_vertex():
    b = dtree.TreeBuilder(n=2, ell=3, m=3)
    r = b.internal(0)
    u = b.internal(1)
    b.edge(r, u, frozenset({0, 1, 2}), dtree.BLACK)
    for q in range(3):
        b.edge(u, b.leaf(q), frozenset({q}), dtree.BLACK if q == 0 else dtree.RED)
    t = b.build(root=r)
    sp_ = spanprog.build_nbsp(t)
    assert spanprog.verify_span_program(sp_).ok


@given(seeds)
def test_positive_witness_equals_path_oracle(seed):
    t = rand_binary(seed)
    sp_ = spanprog.build_binary_sp(t)
    A = sp_.A.toarray()
    for x in dtree.all_inputs(t.n):
        wp = spanprog.witnesses(sp_, x)
        assert np.allclose(wp.w, path_enumeration_witness(sp_, x))
        assert np.abs(A @ wp.w - sp_.target(wp.leaf)).max() < 1e-9


@given(seeds)
def test_negative_witness_invariants(seed):
    t = rand_binary(seed)
    sp_ = spanprog.build_binary_sp(t)
    A = sp_.A.toarray()
    for x in dtree.all_inputs(t.n):
        wp = spanprog.witnesses(sp_, x)
        assert np.abs(wp.wbar @ A[:, sp_.available(x)]).max(initial=0) < 1e-9
        for z in t.leaves:
            assert wp.wbar @ sp_.target(z) == (0.0 if z == wp.leaf else 1.0)


@given(seeds)
def test_binary_bounds(seed):
    t = rand_binary(seed)
    w = spanprog.default_weights(t)
    st_ = dtree.stats(t)
    bp, bn = spanprog.binary_bounds(t, w)
    wp, wn = spanprog.max_witness_sizes(spanprog.build_binary_sp(t, w), dtree.all_inputs(t.n))
    assert wp <= bp + 1e-9 <= 2 * st_.G * st_.T + 1e-8
    assert wn <= bn + 1e-9 <= 2 + 1e-8


@given(seeds)
def test_least_norm_never_exceeds_formula(seed):
    t = rand_binary(seed, n_max=4)
    sp_ = spanprog.build_binary_sp(t)
    for x in dtree.leaf_inputs(t).values():
        wp = spanprog.witnesses(sp_, x)
        lp, ln = spanprog.least_norm_witnesses(sp_, x)
        assert lp <= wp.wsize_pos + 1e-8 and ln <= wp.wsize_neg + 1e-8


@given(seeds, st.integers(2, 4))
def test_nbsp_valid_and_bounded(seed, ell):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    t = dtree.random_tree(n, ell, rng, leaf_prob=0.3)
    w = spanprog.default_weights(t)
    sp_ = spanprog.build_nbsp(t, w)
    rep = spanprog.verify_span_program(sp_, list(dtree.all_inputs(n, ell)))
    bp, bn = spanprog.nbsp_bounds(t, w)
    assert rep.ok and rep.max_wsize_pos <= bp + 1e-9 and rep.max_wsize_neg <= bn + 1e-9


@given(seeds)
def test_nbsp_within_constant_of_binary(seed):
    t = rand_binary(seed, n_max=4)
    b = spanprog.max_witness_sizes(spanprog.build_binary_sp(t))
    nb = spanprog.max_witness_sizes(spanprog.build_nbsp(t))
    assert nb[0] <= 4 * b[0] + 4 and nb[1] <= 4 * b[1] + 4


@pytest.mark.parametrize("seed", range(6))
def test_nbsp_sizes_equal_least_norm(seed):
    rng = np.random.default_rng(seed)
    t = dtree.random_tree(4, 4, rng, leaf_prob=0.3)
    sp_ = spanprog.build_nbsp(t)
    for x in dtree.leaf_inputs(t).values():
        assert np.allclose(spanprog.nbsp_witness_sizes(sp_, x),
                           spanprog.least_norm_witnesses(sp_, x), rtol=1e-6)
