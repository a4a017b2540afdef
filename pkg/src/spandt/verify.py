"""Invariant suites behind ``spandt verify``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dtree, kernel, mgraph, problems, qsim, spanprog


@dataclass
class SuiteResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def kernel_check(dg, alpha, beta, gamma, M=None):
    """Compare the structural basis against an SVD of ``M``.

    Returns ``(count, nullity, max ||M v||, projector gap)``.
    """
    M = mgraph.assemble_matrix(dg, alpha, beta, gamma) if M is None else M
    Md = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
    V = kernel.kernel_basis(dg, alpha, beta, gamma).all()
    s = np.linalg.svd(Md, compute_uv=False)
    nullity = Md.shape[1] - int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    resid = float(np.max(np.linalg.norm(Md @ V, axis=0) / np.linalg.norm(V, axis=0)))
    gap = float(np.linalg.norm(kernel.span_projector(V) - kernel.null_projector(Md), 2))
    return V.shape[1], nullity, resid, gap


def _trees(count, n_max, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(1, n_max + 1))
        out.append(dtree.random_binary_tree(n, rng, leaf_prob=0.3, max_depth=n + 2))
    return out


def suite_spanprog(quick, seed):
    bad = 0
    trees = _trees(10 if quick else 50, 3 if quick else 6, seed)
    for t in trees:
        w = spanprog.default_weights(t)
        sp_ = spanprog.build_binary_sp(t, w)
        rep = spanprog.verify_span_program(sp_)
        st = dtree.stats(t)
        if not rep.ok or rep.max_wsize_pos > 2 * max(st.G, 1) * st.T + 1e-9 or rep.max_wsize_neg > 2 + 1e-9:
            bad += 1
    return bad == 0, f"{len(trees) - bad}/{len(trees)} trees valid within bounds"


def suite_kernel(quick, seed, corrupt=False):
    bad = 0
    trees = _trees(6 if quick else 20, 3 if quick else 5, seed + 1)
    for k, t in enumerate(trees):
        dg = mgraph.build_decision_graph(t, pad_pow2=bool(k % 2))
        M = mgraph.assemble_matrix(dg, 0.3, 0.8, 0.6).tolil()
        if corrupt and k == 0:
            # negative control: one flipped entry must break the structural basis
            r, c = M.nonzero()
            M[r[-1], c[-1]] = -M[r[-1], c[-1]]
        count, nullity, resid, gap = kernel_check(dg, 0.3, 0.8, 0.6, M.tocsc())
        if count != nullity or resid >= 1e-10 or gap >= 1e-8:
            bad += 1
    return bad == 0, f"{len(trees) - bad}/{len(trees)} graphs match the SVD kernel"


def suite_reflection(quick, seed):
    worst = 0.0
    for k, t in enumerate(_trees(6 if quick else 20, 3 if quick else 5, seed + 2)):
        dg = mgraph.build_decision_graph(t, pad_pow2=bool(k % 2))
        plan = kernel.ReflectionPlan(dg, 0.3, 0.8, 0.6)
        M = mgraph.assemble_matrix(dg, 0.3, 0.8, 0.6)
        R = plan.dense()
        P = kernel.null_projector(M)
        worst = max(worst, float(np.linalg.norm(R - (2 * P - np.eye(len(P))), 2)),
                    float(np.linalg.norm(R @ R - np.eye(len(P)), 2)))
    return worst < 1e-8, f"max deviation {worst:.2e}"


def suite_spectral(quick, seed):
    ok, count = True, 0
    for n in range(1, (3 if quick else 4) + 1):
        inst = qsim.compile_instance(dtree.first_marked_tree(n), 0.05)
        for x in dtree.all_inputs(n):
            ok &= qsim.spectral_check(inst, x).ok
            count += 1
    return ok, f"items (i)/(ii) checked on {count} inputs"


def suite_frontends(quick, seed):
    cases = [("first-marked", 3), ("bfs", 3), ("bipartite", 3), ("cycle", 3), ("matching", 3)]
    if not quick:
        cases += [("first-marked", 6), ("bfs", 4), ("bipartite", 4)]
    bad = total = 0
    for prob, n in cases:
        fe = problems.frontend(prob, n)
        inst = qsim.compile_instance(fe.tree, 0.05, xs=fe.domain_inputs())
        for g, x in fe.domain:
            rep = qsim.run(inst, x)
            total += 1
            if fe.decode(rep.top_answer) != fe.reference(g) or rep.success < 1 - 16 * 0.05**2:
                bad += 1
    return bad == 0, f"{total - bad}/{total} runs agree with the classical oracle"


SUITES = [
    ("span-program validity", suite_spanprog),
    ("kernel basis vs SVD", suite_kernel),
    ("reflection equivalence", suite_reflection),
    ("spectral items (i)/(ii)", suite_spectral),
    ("frontend vs oracle", suite_frontends),
]


def run_suites(quick=False, seed=0, corrupt=False):
    out = []
    for name, fn in SUITES:
        t0 = time.perf_counter()
        try:
            ok, detail = fn(quick, seed, corrupt) if fn is suite_kernel else fn(quick, seed)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out


def format_table(results):
    w = max(len(r.name) for r in results)
    lines = [f"{'suite':<{w}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{w}}  {'PASS' if r.ok else 'FAIL':<6}  {r.detail} ({r.seconds:.1f}s)")
    return "\n".join(lines)
