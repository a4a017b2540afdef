"""State-vector simulation of the span program algorithm on M~.

The walk operator is ``U = R_Pi R_Lambda`` with ``R_Lambda`` the structured
reflection through ``ker M~`` and ``R_Pi = 2 Pi_x - I``.  Column 0 of M~ is
the start state ``|0>``; the leaf columns are the answers.

Phase detection has two instantiations of the same contract:

``exact``
    ``R = 2 P_0 - I`` with ``P_0`` the projector on the eigenvalue-1
    eigenspace of ``U``.  That eigenspace is ``(Lambda & Pi) + (Lambda' & Pi')``,
    so ``P_0 |0>`` is the projection of ``|0>`` onto the kernel of the
    available columns of M~ (a sparse least squares problem).  Dense
    eigendecomposition is available for arbitrary states on small instances.

``ancilla``
    ``k`` phase registers of dimension ``N = ceil(2 pi / Theta)``, each
    prepared uniform, controlled ``U^j``, inverse DFT, flip on nonzero,
    uncompute.  Restricted to ancillas in ``|0>`` this acts as
    ``2 (A^k)^dag A^k - I`` with ``A = (1/N) sum_{j<N} U^j``; the simulator
    streams those powers, so memory stays linear in the column count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import _backend, dtree, mgraph, spanprog
from . import kernel as _kernel
from .fft import Counter

# controlled-U budget: calls <= C_BUDGET * log2(1/delta) / Theta
C_BUDGET = 8 * math.pi
PHASE_TOL = 1e-6
DENSE_MAX = 4000
DEFAULT_BUDGET = 2 << 30


class ParameterError(ValueError):
    pass


class MemoryBudgetError(RuntimeError):
    pass


def memory_budget(budget=None):
    """Bytes allowed for simulator state: ``budget``, else ``SPANDT_MEMORY_BUDGET``."""
    if budget is None:
        budget = os.environ.get("SPANDT_MEMORY_BUDGET", DEFAULT_BUDGET)
    if isinstance(budget, str):
        s = budget.strip().upper()
        mult = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}.get(s[-1:], 1)
        budget = float(s[:-1] if mult > 1 else s) * mult
    budget = int(budget)
    if budget <= 0:
        raise ParameterError("memory budget must be positive")
    return budget


def _check_memory(need, budget, what):
    budget = memory_budget(budget)
    if need > budget:
        raise MemoryBudgetError(f"{what} needs {need} bytes, budget is {budget}")


@dataclass
class Instance:
    """Compiled algorithm for one tree and one precision ``eps``."""

    tree: dtree.DecisionTree        # binary tree actually compiled
    source: dtree.DecisionTree      # tree as given (before binarization)
    dg: mgraph.DecisionGraph
    weights: spanprog.Weights
    betas: np.ndarray               # per cycle
    gamma: float
    eps: float
    wsize_pos: float
    wsize_neg: float
    alpha: float
    plan: _kernel.ReflectionPlan
    M: object
    backend: str
    _leaf_cols: dict = field(default_factory=dict, repr=False)

    @property
    def W(self):
        return math.sqrt(self.wsize_pos * self.wsize_neg)

    @property
    def n_cols(self):
        return self.dg.n_cols

    def leaf_column(self, x):
        leaf, _ = dtree.evaluate(self.tree, x)
        return self.dg.leaf_col(leaf)

    def column_leaf(self, col):
        """Tree leaf behind a leaf column, or ``None`` for other columns."""
        if not self._leaf_cols:
            self._leaf_cols = {self.dg.leaf_col(z): z for z in self.tree.leaves}
        return self._leaf_cols.get(col)

    def source_leaf(self, z):
        return self.tree.origin[z] if self.tree is not self.source else z

    def theta(self):
        return self.eps**2 / self.W


def compile_instance(tree, eps, weights=None, pad_pow2=False, backend=None, xs=None):
    """Build M~ and its reflection plan for ``tree`` at precision ``eps``.

    Witness sizes are the maxima of the T~ program over ``xs`` (default: one
    input per leaf, which covers every distinct witness pair).
    """
    if not 0 < eps < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    source = tree
    if not tree.is_binary:
        tree = dtree.binarize(tree)
    w = spanprog.as_weights(tree, weights)
    dg = mgraph.build_decision_graph(tree, pad_pow2=pad_pow2)
    if w.paths is None:
        betas = np.full(len(dg.cycles), math.sqrt(w.black))
    else:
        betas = np.sqrt(np.asarray([w.paths[c.path] for c in dg.cycles], dtype=float))
    gamma = math.sqrt(w.red)
    wp, wn = mgraph.graph_witness_sizes(dg, betas, gamma, xs)
    W = math.sqrt(wp * wn)
    if W <= eps:
        raise ParameterError(f"W = {W:.6g} must exceed epsilon; use a smaller epsilon")
    alpha = math.sqrt(2) * eps / math.sqrt(wp)
    plan = _kernel.ReflectionPlan(dg, alpha, betas, gamma)
    M = mgraph.assemble_matrix(dg, alpha, betas, gamma)
    return Instance(tree, source, dg, w, betas, gamma, eps, wp, wn, alpha, plan, M,
                    _backend.resolve(backend))


# -- reflections ---------------------------------------------------------------

def available_signs(inst, x):
    return np.where(mgraph.available_columns(inst.dg, x), 1.0, -1.0)


def reflect_available(inst, x, state, signs=None):
    """``(2 Pi_x - I) state``: negate unavailable columns."""
    s = available_signs(inst, x) if signs is None else signs
    state = np.asarray(state)
    return state * (s if state.ndim == 1 else s[:, None])


def reflect_kernel(inst, state, ops=None):
    return inst.plan.apply(state, ops=ops, backend=inst.backend)


class Walk:
    """``U = R_Pi R_Lambda`` for one input, with application counters."""

    def __init__(self, inst, x):
        self.inst = inst
        self.x = tuple(x)
        self.signs = available_signs(inst, x)
        self.u_applications = 0
        self.flops = 0

    def apply(self, state, adjoint=False):
        ops = Counter()
        if adjoint:
            out = reflect_kernel(self.inst, reflect_available(self.inst, self.x, state, self.signs), ops)
        else:
            out = reflect_available(self.inst, self.x, reflect_kernel(self.inst, state, ops), self.signs)
        self.u_applications += 1 if np.ndim(state) == 1 else np.shape(state)[1]
        self.flops += ops.flops
        return out

    def average(self, psi, N, adjoint=False):
        """``(1/N) sum_{j<N} U^j psi`` (``U^-1`` when ``adjoint``)."""
        if self.inst.backend == "cython":
            out, f = self.inst.plan.compiled().walk_average(self.signs, psi, N, adjoint)
            self.u_applications += N - 1
            self.flops += f
            return out
        cur = np.array(psi, dtype=complex)
        acc = cur.copy()
        for _ in range(N - 1):
            cur = self.apply(cur, adjoint)
            acc += cur
        return acc / N

    def dense(self):
        return self.signs[:, None] * self.inst.plan.dense(self.inst.backend)


def walk_unitary(inst, x):
    return Walk(inst, x)


# -- spectral helpers ------------------------------------------------------------

@dataclass
class Spectrum:
    phases: np.ndarray     # |theta| per eigenvector
    vectors: np.ndarray    # orthonormal, real

    def projector(self, theta):
        V = self.vectors[:, self.phases <= theta]
        return V @ V.T

    def weight(self, theta, v):
        V = self.vectors[:, self.phases <= theta]
        c = V.T @ v
        return float(np.vdot(c, c).real)


def spectrum(inst, x, budget=None):
    """Eigen-decomposition of ``U + U^T`` (``2 cos theta``); ``U`` is real orthogonal."""
    n = inst.n_cols
    if n > DENSE_MAX:
        raise MemoryBudgetError(f"dense spectrum limited to {DENSE_MAX} columns, got {n}")
    _check_memory(6 * 8 * n * n, budget, "dense eigendecomposition")
    U = Walk(inst, x).dense()
    lam, V = np.linalg.eigh(U + U.T)
    phases = np.arccos(np.clip(lam / 2, -1.0, 1.0))
    return Spectrum(phases, V)


def _kernel_projection(inst, x, v):
    """Projection of ``v`` (supported on available columns) onto ``ker M~ & Pi_x``."""
    mask = mgraph.available_columns(inst.dg, x)
    B = inst.M[:, mask].tocsr()
    vb = np.asarray(v)[mask]
    if B.shape[0] * B.shape[1] <= 4_000_000:
        y, *_ = sla.lstsq(B.T.toarray(), vb, cond=1e-12)
    else:
        y = spla.lsqr(B.T.tocsr(), vb, atol=1e-15, btol=1e-15, conlim=1e12,
                      iter_lim=50 * sum(B.shape))[0]
    out = np.zeros(inst.n_cols, dtype=np.result_type(vb, float))
    out[mask] = vb - B.T @ y
    return out


# -- phase detection -------------------------------------------------------------

@dataclass
class DetectParams:
    theta: float
    delta: float
    registers: int     # k
    dim: int           # N per register
    ancilla_qubits: int
    controlled_u: int

    @property
    def budget(self):
        return C_BUDGET * math.log2(1 / self.delta) / self.theta


def detect_params(theta, delta):
    if not (0 < theta < 1 and 0 < delta < 1):
        raise ParameterError("Theta and delta must lie in (0, 1)")
    k = math.ceil(math.log2(2 / delta))
    N = math.ceil(2 * math.pi / theta)
    return DetectParams(theta, delta, k, N, k * math.ceil(math.log2(N)), 2 * k * (N - 1))


def phase_detect(walk, state, theta, delta, mode="exact", budget=None):
    """Apply phase detection ``R(U)`` to ``state`` with ancillas in ``|0>``.

    Returns ``(ancilla_zero_component, params)``; the rest of the norm sits on
    nonzero ancilla values.
    """
    params = detect_params(theta, delta)
    inst, n = walk.inst, walk.inst.n_cols
    state = np.asarray(state, dtype=complex)
    if mode == "exact":
        sp_ = spectrum(inst, walk.x, budget)
        V = sp_.vectors[:, sp_.phases < PHASE_TOL]
        return 2 * (V @ (V.T @ state)) - state, params
    if mode != "ancilla":
        raise ParameterError(f"unknown mode {mode!r}")
    _check_memory(8 * 16 * n, budget, "ancilla mode")
    y = state
    for _ in range(params.registers):
        y = walk.average(y, params.dim)
    for _ in range(params.registers):
        y = walk.average(y, params.dim, adjoint=True)
    return 2 * y - state, params


# -- end-to-end run ------------------------------------------------------------

@dataclass
class RunReport:
    x: tuple
    mode: str
    leaf: int                 # tree leaf reached by x
    answer: object            # its label
    success: float            # mass on that leaf's column with ancillas zero
    top_column: int
    top_answer: object        # label behind the most likely column (None if not a leaf)
    distribution: dict        # column -> probability (ancillas zero), plus "ancilla" mass
    eps: float
    theta: float
    delta: float
    W: float
    wsize_pos: float
    wsize_neg: float
    registers: int
    register_dim: int
    ancilla_qubits: int
    controlled_u: int
    controlled_u_budget: float
    u_applications: int
    r_pi_applications: int
    oracle_queries: int
    thm2_reflections: int
    flops: int

    @property
    def correct(self):
        return self.top_answer == self.answer


def run(inst, x, mode="exact", budget=None, method=None):
    """Run the algorithm on input ``x``.

    ``mode="exact"`` uses the kernel characterization of ``P_0`` unless
    ``method="eigh"`` asks for the dense eigendecomposition.
    """
    x = dtree.check_input(inst.tree, x)
    theta, delta = inst.theta(), inst.eps
    params = detect_params(theta, delta)
    walk = Walk(inst, x)
    e0 = np.zeros(inst.n_cols)
    e0[0] = 1.0
    if mode == "exact" and method != "eigh":
        _check_memory(8 * inst.M.nnz * 8 + 64 * inst.n_cols, budget, "exact mode")
        out = 2 * _kernel_projection(inst, x, e0) - e0
    else:
        out, _ = phase_detect(walk, e0, theta, delta, mode, budget)
    probs = np.abs(out) ** 2
    leaf, _ = dtree.evaluate(inst.tree, x)
    col = inst.dg.leaf_col(leaf)
    top = int(np.argmax(probs))
    top_leaf = inst.column_leaf(top)
    dist = {int(i): float(p) for i, p in enumerate(probs) if p > 1e-15}
    dist["ancilla"] = max(0.0, 1.0 - float(probs.sum()))
    r_pi = params.controlled_u if mode == "ancilla" else 0
    return RunReport(
        x=tuple(int(v) for v in x), mode=mode, leaf=leaf,
        answer=inst.tree.leaf_label[leaf], success=float(probs[col]),
        top_column=top,
        top_answer=None if top_leaf is None else inst.tree.leaf_label[top_leaf],
        distribution=dist, eps=inst.eps, theta=theta, delta=delta, W=inst.W,
        wsize_pos=inst.wsize_pos, wsize_neg=inst.wsize_neg,
        registers=params.registers, register_dim=params.dim,
        ancilla_qubits=params.ancilla_qubits, controlled_u=params.controlled_u,
        controlled_u_budget=params.budget, u_applications=walk.u_applications,
        r_pi_applications=r_pi, oracle_queries=2 * r_pi,
        thm2_reflections=math.ceil(inst.W), flops=walk.flops,
    )


def sample(report, shots, seed=0):
    """Seeded measurement samples drawn from a report's outcome distribution."""
    keys = list(report.distribution)
    p = np.array([report.distribution[k] for k in keys])
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(keys), size=shots, p=p / p.sum())
    return [keys[i] for i in idx]


# -- spectral diagnostics ------------------------------------------------------------

@dataclass
class SpectralDiagnostics:
    x: tuple
    p0_plus: float                 # ||P_0 phi+||^2
    item_i: bool
    p_theta_minus: dict            # Theta -> ||P_Theta phi-||^2
    bound_ii: dict                 # Theta -> (Theta^2/4)(1 + W^2/(4 eps^2))
    item_ii: bool
    psi_fixed: float               # ||U psi - psi|| / ||psi||
    psibar_pi: float               # ||Pi psibar - phi-||
    psibar_lambda: float           # ||Lambda psibar||
    ok: bool


def phi_states(inst, x):
    e0 = np.zeros(inst.n_cols)
    e0[0] = 1.0
    ef = np.zeros(inst.n_cols)
    ef[inst.leaf_column(x)] = 1.0
    return (e0 + ef) / math.sqrt(2), (e0 - ef) / math.sqrt(2)


def psi_states(inst, x):
    """``psi_x`` (fixed by ``U``) and ``psibar_x`` (orthogonal to the kernel)."""
    gw = mgraph.graph_witnesses(inst.dg, x, inst.betas, inst.gamma)
    plus, minus = phi_states(inst, x)
    psi = plus - inst.eps / math.sqrt(inst.wsize_pos) * gw.w
    proj = inst.M.T @ gw.wbar
    proj[: 1 + len(inst.tree.leaves)] = 0.0
    psibar = minus + math.sqrt(inst.wsize_pos) / (2 * inst.eps) * proj
    return psi, psibar


def spectral_check(inst, x, thetas=None, budget=None, spec=None):
    x = dtree.check_input(inst.tree, x)
    if thetas is None:
        t0 = inst.theta()
        thetas = (t0, 2 * t0, 5 * t0)
    sp_ = spectrum(inst, x, budget) if spec is None else spec
    plus, minus = phi_states(inst, x)
    eps, W = inst.eps, inst.W
    p0 = sp_.weight(PHASE_TOL, plus)
    pm, bnd = {}, {}
    for t in thetas:
        pm[float(t)] = sp_.weight(max(t, PHASE_TOL) if t > 0 else PHASE_TOL, minus)
        bnd[float(t)] = (t * t / 4) * (1 + W * W / (4 * eps * eps))
    item_i = p0 >= 1 - eps * eps - 1e-12
    item_ii = all(pm[t] <= bnd[t] + 1e-12 for t in pm)
    psi, psibar = psi_states(inst, x)
    walk = Walk(inst, x)
    fixed = float(np.linalg.norm(walk.apply(psi) - psi) / np.linalg.norm(psi))
    mask = mgraph.available_columns(inst.dg, x)
    pib = float(np.linalg.norm(np.where(mask, psibar, 0) - minus))
    lam = 0.5 * (reflect_kernel(inst, psibar) + psibar)
    lamn = float(np.linalg.norm(lam))
    ok = item_i and item_ii and fixed < 1e-8 and pib < 1e-8 and lamn < 1e-8
    return SpectralDiagnostics(tuple(int(v) for v in x), p0, item_i, pm, bnd, item_ii,
                               fixed, pib, lamn, ok)


def spectral_gap_check(inst, x, theta, rng, samples=8, spec=None):
    """Largest ``||P_Theta Pi u|| / ((Theta/2) ||u||)`` over random ``u`` with ``Lambda u = 0``."""
    sp_ = spectrum(inst, x) if spec is None else spec
    mask = mgraph.available_columns(inst.dg, x)
    V = sp_.vectors[:, sp_.phases <= theta]
    worst = 0.0
    for _ in range(samples):
        r = rng.standard_normal(inst.n_cols)
        u = 0.5 * (r - reflect_kernel(inst, r).real)     # (I - Lambda) r
        c = V.T @ np.where(mask, u, 0.0)
        worst = max(worst, float(np.linalg.norm(c) / (theta / 2 * np.linalg.norm(u))))
    return worst
