import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spandt import _backend, dtree, mgraph, qsim

EPS = 0.05


@pytest.fixture(scope="module")
def fm3():
    return qsim.compile_instance(dtree.first_marked_tree(3), EPS)


def test_scalars(fm3):
    assert fm3.gamma == pytest.approx(math.sqrt(1 / 3))
    assert np.allclose(fm3.betas, 1.0)
    assert fm3.alpha == pytest.approx(math.sqrt(2) * EPS / math.sqrt(fm3.wsize_pos))
    assert fm3.theta() == pytest.approx(EPS**2 / fm3.W)


def test_first_marked_witness_sizes():
    # positive 3n+1 and negative 4 + 6/n for the decision-graph program
    for n in (2, 4, 8):
        inst = qsim.compile_instance(dtree.first_marked_tree(n), EPS)
        assert inst.wsize_pos == pytest.approx(3 * n + 1)
        assert inst.wsize_neg == pytest.approx(4 + 6 / n)


def test_parameter_errors(monkeypatch):
    t = dtree.first_marked_tree(2)
    with pytest.raises(qsim.ParameterError):
        qsim.compile_instance(t, 1.5)
    # W >= 1 always holds (<wbar|M w> = 1), so fake tiny witness sizes
    monkeypatch.setattr(mgraph, "graph_witness_sizes", lambda *a, **k: (0.1, 0.1))
    with pytest.raises(qsim.ParameterError, match="smaller epsilon"):
        qsim.compile_instance(t, 0.5)
    with pytest.raises(qsim.ParameterError):
        qsim.detect_params(0.0, 0.1)


def test_available_reflection(fm3):
    x = (1, 0, 0)
    out = qsim.reflect_available(fm3, x, np.ones(fm3.n_cols))
    assert out[0] == 1.0
    dg = fm3.dg
    for col, e, kind in dg.edge_list():
        if kind == "pseudo":
            assert out[col] == -1.0
    root_reds = {e.tail: col for col, e, kind in dg.edge_list()
                 if kind == "edge" and e.color == dtree.RED and e.tail in (dg.row[("v", 0)], dg.row[("v", 1)])}
    assert out[root_reds[dg.row[("v", 0)]]] == 1.0
    assert out[root_reds[dg.row[("v", 1)]]] == -1.0


def test_walk_unitary_and_fixed_vector(fm3, rng):
    for x in dtree.all_inputs(3):
        walk = qsim.walk_unitary(fm3, x)
        U = walk.dense()
        assert np.abs(U.T @ U - np.eye(fm3.n_cols)).max() < 1e-10
        psi, _ = qsim.psi_states(fm3, x)
        assert np.linalg.norm(walk.apply(psi) - psi) < 1e-10
        v = rng.standard_normal(fm3.n_cols)
        assert abs(np.linalg.norm(walk.apply(v)) - np.linalg.norm(v)) < 1e-10
        assert np.allclose(walk.apply(walk.apply(v), adjoint=True), v)


def test_spectrum_symmetric(fm3):
    U = qsim.Walk(fm3, (0, 1, 0)).dense()
    ev = np.linalg.eigvals(U)
    assert np.allclose(np.sort_complex(ev), np.sort_complex(ev.conj()), atol=1e-8)


def test_phase_detect_exact(fm3):
    x = (0, 0, 1)
    walk = qsim.Walk(fm3, x)
    psi, _ = qsim.psi_states(fm3, x)
    out, _ = qsim.phase_detect(walk, psi, fm3.theta(), EPS)
    assert np.allclose(out, psi, atol=1e-8)
    spec = qsim.spectrum(fm3, x)
    k = int(np.argmax(spec.phases))
    if spec.phases[k] > math.pi - 1e-6:
        v = spec.vectors[:, k]
        out, _ = qsim.phase_detect(walk, v, fm3.theta(), EPS)
        assert np.allclose(out, -v, atol=1e-8)


@pytest.mark.parametrize("n", [2, 4])
def test_run_success(n):
    inst = qsim.compile_instance(dtree.first_marked_tree(n), EPS)
    for x in dtree.all_inputs(n):
        rep = qsim.run(inst, x)
        assert rep.success >= 1 - 16 * EPS**2 and rep.correct
        assert sum(rep.distribution.values()) == pytest.approx(1.0, abs=1e-10)
        assert rep.controlled_u <= rep.controlled_u_budget


def test_exact_methods_agree(fm3):
    for x in dtree.all_inputs(3):
        a, b = qsim.run(fm3, x), qsim.run(fm3, x, method="eigh")
        assert a.success == pytest.approx(b.success, abs=1e-8)


def test_ancilla_matches_exact():
    inst = qsim.compile_instance(dtree.first_marked_tree(2), EPS)
    for x in dtree.all_inputs(2):
        a, b = qsim.run(inst, x, mode="ancilla"), qsim.run(inst, x)
        assert abs(a.success - b.success) <= 2 * EPS
        assert sum(a.distribution.values()) == pytest.approx(1.0, abs=1e-10)
        assert a.controlled_u == 2 * a.registers * (a.register_dim - 1)


@pytest.mark.skipif("cython" not in _backend.available(), reason="compiled core not built")
def test_backends_give_same_run():
    t = dtree.first_marked_tree(2)
    # coarse precision keeps the pure-Python walk short
    a = qsim.run(qsim.compile_instance(t, 0.2, backend="python"), (0, 1), mode="ancilla")
    b = qsim.run(qsim.compile_instance(t, 0.2, backend="cython"), (0, 1), mode="ancilla")
    assert a.success == pytest.approx(b.success, abs=1e-10) and a.flops == b.flops


def test_spectral_items(fm3):
    for x in dtree.all_inputs(3):
        d = qsim.spectral_check(fm3, x, thetas=(0.0, fm3.theta(), 5 * fm3.theta()))
        assert d.ok and d.p0_plus >= 1 - EPS**2
        assert d.p_theta_minus[0.0] < 1e-12


def test_spectral_gap(fm3, rng):
    for x in [(0, 0, 0), (0, 1, 0)]:
        spec = qsim.spectrum(fm3, x)
        for theta in (0.05, 0.3, 1.0):
            assert qsim.spectral_gap_check(fm3, x, theta, rng, spec=spec) <= 1 + 1e-8


def test_memory_budget(monkeypatch):
    assert qsim.memory_budget("2K") == 2048
    assert qsim.memory_budget("1.5M") == 3 << 19
    monkeypatch.setenv("SPANDT_MEMORY_BUDGET", "3G")
    assert qsim.memory_budget() == 3 << 30
    with pytest.raises(qsim.ParameterError):
        qsim.memory_budget(0)
    inst = qsim.compile_instance(dtree.first_marked_tree(2), EPS)
    with pytest.raises(qsim.MemoryBudgetError):
        qsim.run(inst, (0, 0), budget=16)
    with pytest.raises(qsim.MemoryBudgetError):
        qsim.run(inst, (0, 0), mode="ancilla", budget=16)


def test_sample_deterministic(fm3):
    rep = qsim.run(fm3, (0, 1, 0))
    assert qsim.sample(rep, 50, seed=3) == qsim.sample(rep, 50, seed=3)
    assert qsim.sample(rep, 200, seed=1).count(rep.top_column) > 150


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_random_trees_succeed(seed, pad):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    t = dtree.random_binary_tree(n, rng, leaf_prob=0.3, max_depth=n)
    inst = qsim.compile_instance(t, 0.1, pad_pow2=pad, xs=list(dtree.all_inputs(n)))
    for x in dtree.all_inputs(n):
        rep = qsim.run(inst, x)
        assert rep.correct and rep.success >= 2 / 3
        psi, psibar = qsim.psi_states(inst, x)
        mask = mgraph.available_columns(inst.dg, x)
        _, minus = qsim.phi_states(inst, x)
        assert np.allclose(np.where(mask, psibar, 0), minus, atol=1e-10)
        assert np.linalg.norm(qsim.reflect_kernel(inst, psibar) + psibar) < 1e-8
