import numpy as np
import pytest
from hypothesis import given, strategies as st

from spandt import _backend, dtree, kernel, mgraph, verify

seeds = st.integers(0, 2**32 - 1)
A, B, G = 0.3, 0.8, 0.6


def rand_graph(seed, pad=False, n_max=5):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    return mgraph.build_decision_graph(dtree.random_binary_tree(n, rng, leaf_prob=0.3, max_depth=n),
                                       pad_pow2=pad)


def dense_reflection(V):
    P = kernel.span_projector(V)
    return 2 * P - np.eye(len(P))


def test_leaf_vector_cancels():
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(3))
    M = mgraph.assemble_matrix(dg, A, B, G)
    basis = kernel.kernel_basis(dg, A, B, G)
    assert np.abs(M @ basis.type1).max() < 1e-12


@pytest.mark.parametrize("n", range(2, 9))
def test_first_marked_basis_size(n):
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(n))
    assert kernel.kernel_basis(dg, A, B, G).count == 2 * n + 4


@given(seeds, st.booleans())
def test_basis_matches_svd(seed, pad):
    dg = rand_graph(seed, pad)
    count, nullity, resid, gap = verify.kernel_check(dg, A, B, G)
    assert count == nullity and resid < 1e-10 and gap < 1e-8


@given(seeds)
def test_type1_orthogonality(seed):
    dg = rand_graph(seed)
    kb = kernel.kernel_basis(dg, A, B, G)
    gram = kb.type1.T @ kb.type1
    assert np.abs(gram - np.diag(np.diag(gram))).max() < 1e-10
    for T2 in kb.type2:
        assert np.abs(kb.type1.T @ T2).max() < 1e-10


@pytest.mark.parametrize("t", [1, 2, 3, 4, 8, 13])
def test_cycle_orthonormalizer(t):
    co = kernel.CycleOrthonormalizer(t, B, G)
    W = co.matrix()
    assert np.abs(W.conj().T @ W - np.eye(2 * t)).max() < 1e-10
    D = co.F.conj().T @ co.Bp @ co.F
    assert np.abs(D - np.diag(np.diag(D))).max() < 1e-10
    L = co.F.conj().T @ co.L @ co.F
    assert np.abs(L - np.diag(np.diag(L))).max() < 1e-10


@pytest.mark.parametrize("t", [1, 2, 5, 16])
def test_cycle_reflection_matches_dense(t, rng):
    co = kernel.CycleOrthonormalizer(t, B, G)
    # Type II family of one cycle in (f, b) coordinates
    fam = np.zeros((2 * t, t))
    for i in range(t):
        fam[t + i, i] = np.sqrt(2) / B
        fam[(i + 1) % t, i] += 1 / G
        fam[i, i] -= 1 / G
    R = dense_reflection(fam)
    x = rng.standard_normal(2 * t)
    assert np.allclose(kernel.cycle_reflection(t, B, G, x), R @ x, atol=1e-10)
    assert np.allclose(co.reflection(), R, atol=1e-10)


def test_cycle_reflection_dimension_error():
    with pytest.raises(kernel.KernelError):
        kernel.cycle_reflection(3, B, G, np.zeros(5))


def test_type1_reflection():
    dg = mgraph.build_decision_graph(dtree.first_marked_tree(3))
    plan = kernel.ReflectionPlan(dg, A, B, G)
    kb = kernel.kernel_basis(dg, A, B, G)
    # coordinates of the Type I triples, mapped back to the standard frame
    F = kernel.frame_matrix(dg)
    S = F[:, np.concatenate([plan.t1_a, plan.t1_b])]
    PS, PI = S @ S.T, kernel.span_projector(kb.type1)
    R1 = np.eye(dg.n_cols) - 2 * PS + 2 * PI
    for v in kb.type1.T:
        assert np.allclose(kernel.type1_reflection(plan, v), v)
    rng = np.random.default_rng(0)
    e = PS @ rng.standard_normal(dg.n_cols)
    e -= PI @ e
    assert np.allclose(kernel.type1_reflection(plan, e), -e)
    x = rng.standard_normal(dg.n_cols)
    assert np.allclose(kernel.type1_reflection(plan, x), R1 @ x)


@pytest.mark.parametrize("leaf", [True, False])
def test_type1_triple_is_reflection(leaf):
    R = kernel.type1_triple(A, G, leaf)
    assert np.allclose(R @ R, np.eye(3)) and np.allclose(R, R.T)
    assert np.isclose(np.trace(R), 1.0)   # eigenvalues (1, -1, 1)


@given(seeds, st.booleans())
def test_reflection_properties(seed, pad):
    dg = rand_graph(seed, pad)
    plan = kernel.ReflectionPlan(dg, A, B, G)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dg.n_cols) + 1j * rng.standard_normal(dg.n_cols)
    y = plan.apply(x)
    assert np.linalg.norm(plan.apply(y) - x) < 1e-10 * np.linalg.norm(x)
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) < 1e-10 * np.linalg.norm(x)
    V = kernel.kernel_basis(dg, A, B, G).all()
    assert np.allclose(plan.apply(V).real, V, atol=1e-10)
    M = mgraph.assemble_matrix(dg, A, B, G)
    R = plan.dense()
    assert np.linalg.norm(R - (2 * kernel.null_projector(M) - np.eye(dg.n_cols)), 2) < 1e-8
    assert np.allclose(R, R.T, atol=1e-12)


@pytest.mark.skipif("cython" not in _backend.available(), reason="compiled core not built")
@given(seeds, st.booleans())
def test_backends_agree(seed, pad):
    dg = rand_graph(seed, pad)
    plan = kernel.ReflectionPlan(dg, A, B, G)
    x = np.random.default_rng(seed).standard_normal(dg.n_cols) + 0j
    assert np.allclose(plan.apply(x, backend="python"), plan.apply(x, backend="cython"), atol=1e-12)
    assert plan.flops("python") == plan.flops("cython")


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.resolve("fortran")
