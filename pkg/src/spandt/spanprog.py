"""Span programs built from colored decision trees.

Two constructions:

* :func:`build_binary_sp` -- one input vector ``sqrt(W_c) (|v> - |child>)`` per
  tree edge, available when the queried symbol lies in the edge label.  Works
  for any tree whose internal vertices have two children (including the output
  of :func:`spandt.dtree.binarize`, where labels are subsets of a larger
  alphabet).
* :func:`build_nbsp` -- the non-binary program over an auxiliary space with
  coordinates ``|v,black>``, ``|v,red>``, ``|v#>`` and ``|v>``.

Targets are ``|t_z> = |root> - |z>`` for every leaf ``z``.  Witnesses for an
input depend only on the leaf it reaches.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import dtree
from .dtree import BLACK, RED

TOL = 1e-9

FREE = "free"
FORBID = "forbid"


class UnsupportedTree(ValueError):
    """The construction needs a tree with two children per internal vertex."""


class SpanProgramViolation(AssertionError):
    def __init__(self, x, clause, value):
        super().__init__(f"x={x}: {clause} (value {value:.3g})")
        self.x, self.clause, self.value = x, clause, value


@dataclass(frozen=True)
class Weights:
    black: float
    red: float
    # optional per-black-path override, indexed like tree.black_paths()
    paths: tuple | None = None

    def __post_init__(self):
        if not (self.black > 0 and self.red > 0):
            raise ValueError("weights must be positive")
        if self.paths is not None and not all(w > 0 for w in self.paths):
            raise ValueError("per-path weights must be positive")

    def black_of(self, tree, v):
        if self.paths is None:
            return self.black
        return self.paths[tree._black_paths()[1][v][0]]


def default_weights(tree):
    st = dtree.stats(tree)
    return Weights(black=1.0 / max(st.G, 1), red=1.0 / st.T)


def as_weights(tree, weights):
    if weights is None:
        return default_weights(tree)
    if isinstance(weights, Weights):
        return weights
    return Weights(*weights)


@dataclass
class SpanProgram:
    """Span program over the vertex basis of a tree.

    ``A`` has one row per tree vertex (row ``v`` is ``|v>``).  For the binary
    program its columns are the input vectors and ``rule[c]`` is either
    ``(j, label)`` (available iff ``x[j]`` is in ``label``), :data:`FREE` or
    :data:`FORBID`.  For the non-binary program the columns are images of an
    orthonormal basis of ``H`` and availability is described by the
    spanning sets in ``hat_inputs`` (see :func:`build_nbsp`).
    """

    kind: str
    tree: dtree.DecisionTree
    weights: Weights
    A: sp.csc_array
    rule: list = field(default_factory=list)
    col_edge: list = field(default_factory=list)
    # non-binary extras
    hat_index: dict | None = None
    A_hat: np.ndarray | None = None
    H_basis: np.ndarray | None = None
    hat_inputs: list | None = None  # (rule, vector over hat space)

    @property
    def dim(self):
        return self.A.shape[0]

    def target(self, z):
        t = np.zeros(self.dim)
        t[self.tree.root] += 1.0
        t[z] -= 1.0
        return t

    def groups(self):
        """Column indices keyed by ``(j, q)``, plus ``FREE`` and ``FORBID``."""
        out = {}
        for c, r in enumerate(self.rule):
            if r in (FREE, FORBID):
                out.setdefault(r, []).append(c)
            else:
                j, lab = r
                for q in sorted(lab):
                    out.setdefault((j, q), []).append(c)
        return out

    def available(self, x):
        return np.array([_is_avail(r, x) for r in self.rule], dtype=bool)


def _is_avail(rule, x):
    if rule == FREE:
        return True
    if rule == FORBID:
        return False
    j, lab = rule
    return x[j] in lab


@dataclass
class WitnessPair:
    x: tuple
    leaf: int
    w: np.ndarray        # positive witness (column coefficients, or hat-space vector)
    wbar: np.ndarray     # negative witness over the vertex basis
    wsize_pos: float
    wsize_neg: float


# -- binary program ---------------------------------------------------------

def build_binary_sp(tree, weights=None):
    if not tree.is_binary:
        raise UnsupportedTree("build_binary_sp needs two children per vertex; binarize first")
    weights = as_weights(tree, weights)
    rows, cols, vals, rule, col_edge = [], [], [], [], []
    for v in tree.internal:
        for e in tree.edges[v]:
            w = weights.black_of(tree, v) if e.color == BLACK else weights.red
            c = len(rule)
            s = np.sqrt(w)
            rows += [v, e.child]
            cols += [c, c]
            vals += [s, -s]
            rule.append((tree.query[v], e.label))
            col_edge.append((v, e.child))
    A = sp.csc_array((vals, (rows, cols)), shape=(len(tree), len(rule)))
    return SpanProgram("binary", tree, weights, A, rule, col_edge)


def _edge_weight(sp_, v, e):
    if e.color == BLACK:
        return sp_.weights.black_of(sp_.tree, v)
    return sp_.weights.red


def witnesses(sp_, x, check=True):
    """Path-sum positive witness and path-indicator negative witness for ``x``."""
    tree = sp_.tree
    x = dtree.check_input(tree, x)
    leaf, _ = dtree.evaluate(tree, x)
    path = dtree.root_path(tree, leaf)
    wbar = np.zeros(sp_.dim)
    wbar[path] = 1.0
    if sp_.kind == "nbsp":
        return _nbsp_witnesses(sp_, x, leaf, path, wbar, check)
    col_of = {edge: c for c, edge in enumerate(sp_.col_edge)}
    w = np.zeros(sp_.A.shape[1])
    for v, child in zip(path, path[1:]):
        _, e = tree.edge_to(child)
        w[col_of[(v, child)]] = 1.0 / np.sqrt(_edge_weight(sp_, v, e))
    wp = WitnessPair(x, leaf, w, wbar, float(w @ w), float(np.sum((sp_.A.T @ wbar) ** 2)))
    if check:
        _check_pair(sp_, wp)
    return wp


def _check_pair(sp_, wp):
    A = sp_.A.toarray()
    avail = sp_.available(wp.x)
    if np.any(wp.w[~avail] != 0):
        raise SpanProgramViolation(wp.x, "positive witness uses an unavailable column", 1.0)
    res = np.abs(A @ wp.w - sp_.target(wp.leaf)).max()
    if res > TOL:
        raise SpanProgramViolation(wp.x, "A w != t_f(x)", res)
    ortho = np.abs(wp.wbar @ A[:, avail]).max(initial=0.0)
    if ortho > TOL:
        raise SpanProgramViolation(wp.x, "negative witness not orthogonal to available columns", ortho)
    for z in sp_.tree.leaves:
        want = 0.0 if z == wp.leaf else 1.0
        got = wp.wbar @ sp_.target(z)
        if abs(got - want) > TOL:
            raise SpanProgramViolation(wp.x, f"<wbar|t_{z}> != {want}", abs(got - want))


def binary_bounds(tree, weights):
    """``(G/W_red + T/W_black, W_black G + W_red T)`` with the largest black weight."""
    st = dtree.stats(tree)
    wb = max(weights.paths) if weights.paths else weights.black
    wb_min = min(weights.paths) if weights.paths else weights.black
    return st.G / weights.red + st.T / wb_min, wb * st.G + weights.red * st.T


# -- verification -----------------------------------------------------------

def domain_sample(tree, cap=4096, rng=None):
    """Every input when ``ell**n <= cap``; otherwise one input per reachable
    leaf plus a seeded random sample."""
    if tree.ell ** tree.n <= cap:
        return [tuple(x) for x in dtree.all_inputs(tree.n, tree.ell)]
    rng = np.random.default_rng(0 if rng is None else rng)
    xs = list(dtree.leaf_inputs(tree).values())
    xs += [tuple(int(q) for q in rng.integers(tree.ell, size=tree.n)) for _ in range(cap)]
    return xs


@dataclass
class VerifyReport:
    ok: bool
    n_inputs: int
    max_pos_residual: float
    min_neg_residual: float
    max_wsize_pos: float
    max_wsize_neg: float
    failures: list

    def raise_if_failed(self):
        if self.failures:
            raise SpanProgramViolation(*self.failures[0])


def _available_basis(sp_, x):
    if sp_.kind == "nbsp":
        return _nbsp_available_image(sp_, x)
    return sp_.A.toarray()[:, sp_.available(x)]


def verify_span_program(sp_, xs=None, tol=TOL):
    """Check that exactly the right target is in the available span for every ``x``.

    Membership is decided by least-squares residuals; witness sizes come
    from :func:`witnesses`.
    """
    tree = sp_.tree
    xs = domain_sample(tree) if xs is None else [tuple(x) for x in xs]
    leaves = tree.leaves
    T = np.stack([sp_.target(z) for z in leaves], axis=1)
    failures = []
    max_pos, min_neg, wp_max, wn_max = 0.0, np.inf, 0.0, 0.0
    cache = {}
    for x in xs:
        leaf, _ = dtree.evaluate(tree, x)
        key = tuple(_is_avail(r, x) for r in sp_.rule) if sp_.kind == "binary" else x
        if key not in cache:
            B = _available_basis(sp_, x)
            if B.shape[1]:
                u, s, _ = np.linalg.svd(B, full_matrices=False)
                u = u[:, s > 1e-12 * max(s[0], 1.0)]
            else:
                u = B
            cache[key] = np.linalg.norm(T - u @ (u.T @ T), axis=0)
        res = cache[key]
        for z, r in zip(leaves, res):
            if z == leaf:
                max_pos = max(max_pos, r)
                if r > tol:
                    failures.append((x, f"target of leaf {z} not in available span", r))
            else:
                min_neg = min(min_neg, r)
                if r <= tol:
                    failures.append((x, f"target of wrong leaf {z} is in available span", r))
        try:
            wp = witnesses(sp_, x)
        except SpanProgramViolation as err:
            failures.append((err.x, err.clause, err.value))
            continue
        wp_max, wn_max = max(wp_max, wp.wsize_pos), max(wn_max, wp.wsize_neg)
    return VerifyReport(not failures, len(xs), max_pos, min_neg, wp_max, wn_max, failures)


# -- non-binary program -----------------------------------------------------

def build_nbsp(tree, weights=None):
    """Non-binary span program for a generalized tree (any alphabet).

    Hat-space coordinates: ``("b", v)``, ``("r", v)``, ``("#", v)`` for
    internal ``v`` and ``("v", v)`` for every vertex.  ``A`` holds the images
    of the orthonormal basis of ``H``: ``(|v,black> - |b_v>)/sqrt2``,
    ``|v,red>``, ``|u>`` for ``u`` with a red parent edge, and ``|v#>``.
    """
    weights = as_weights(tree, weights)
    if weights.paths is not None:
        raise ValueError("per-path weights apply to the binary program only")
    wb, wr = weights.black, weights.red
    idx = {}
    for v in tree.internal:
        for tag in ("b", "r", "#"):
            idx[(tag, v)] = len(idx)
    for v in range(len(tree)):
        idx[("v", v)] = len(idx)
    nv, nh = len(tree), len(idx)
    Ahat = np.zeros((nv, nh))
    for v in tree.internal:
        kids = [e.child for e in tree.edges[v]]
        Ahat[kids, idx[("b", v)]] = np.sqrt(wb)
        Ahat[kids, idx[("r", v)]] = np.sqrt(wr)
        Ahat[v, idx[("#", v)]] = 1.0
        Ahat[kids, idx[("#", v)]] -= 1.0
    for v in range(nv):
        if tree.parent[v] is not None:
            Ahat[v, idx[("v", v)]] = np.sqrt(wb if tree.parent_color[v] == BLACK else wr)

    def unit(*terms):
        h = np.zeros(nh)
        for coef, key in terms:
            h[idx[key]] += coef
        return h

    basis, rule = [], []
    s2 = 1 / np.sqrt(2)
    for v in tree.internal:
        bv = tree.black_child(v)
        basis.append(unit((s2, ("b", v)), (-s2, ("v", bv))))
        rule.append(None)
        basis.append(unit((1.0, ("r", v))))
        rule.append(FORBID)
        for e in tree.red_edges(v):
            basis.append(unit((1.0, ("v", e.child))))
            rule.append(None)
        basis.append(unit((1.0, ("#", v))))
        rule.append(FREE)
    Hb = np.stack(basis, axis=1)
    hat_inputs = []
    for v in tree.internal:
        for e in tree.edges[v]:
            tag = "b" if e.color == BLACK else "r"
            hat_inputs.append(((tree.query[v], e.label), unit((1.0, (tag, v)), (-1.0, ("v", e.child)))))
        hat_inputs.append((FREE, unit((1.0, ("#", v)))))
        hat_inputs.append((FORBID, unit((1.0, ("r", v)))))
    A = sp.csc_array(Ahat @ Hb)
    return SpanProgram("nbsp", tree, weights, A, rule, [], idx, Ahat, Hb, hat_inputs)


def _nbsp_available(sp_, x):
    """Orthonormal basis (hat coordinates) of ``H(x)``."""
    S = np.stack([h for r, h in sp_.hat_inputs if _is_avail(r, x)], axis=1)
    return sla.orth(S)


def _nbsp_available_image(sp_, x):
    return sp_.A_hat @ _nbsp_available(sp_, x)


def _nbsp_witnesses(sp_, x, leaf, path, wbar, check):
    tree, idx = sp_.tree, sp_.hat_index
    wb, wr = sp_.weights.black, sp_.weights.red
    w = np.zeros(len(idx))
    for v, child in zip(path, path[1:]):
        _, e = tree.edge_to(child)
        c = 1 / np.sqrt(wb if e.color == BLACK else wr)
        w[idx[("#", v)]] += 1.0
        w[idx[("b" if e.color == BLACK else "r", v)]] += c
        w[idx[("v", child)]] -= c
    wneg = float(np.sum((sp_.H_basis.T @ (sp_.A_hat.T @ wbar)) ** 2))
    wp = WitnessPair(x, leaf, w, wbar, float(w @ w), wneg)
    if check:
        Bx = _nbsp_available(sp_, x)
        out = np.abs(w - Bx @ (Bx.T @ w)).max()
        if out > TOL:
            raise SpanProgramViolation(x, "positive witness leaves H(x)", out)
        res = np.abs(sp_.A_hat @ w - sp_.target(leaf)).max()
        if res > TOL:
            raise SpanProgramViolation(x, "A w != t_f(x)", res)
        ortho = np.abs(wbar @ (sp_.A_hat @ Bx)).max(initial=0.0)
        if ortho > TOL:
            raise SpanProgramViolation(x, "negative witness not orthogonal to A H(x)", ortho)
        for z in tree.leaves:
            want = 0.0 if z == leaf else 1.0
            if abs(wbar @ sp_.target(z) - want) > TOL:
                raise SpanProgramViolation(x, f"<wbar|t_{z}> != {want}", 1.0)
    return wp


def nbsp_witness_sizes(nbsp, x):
    wp = witnesses(nbsp, x)
    return wp.wsize_pos, wp.wsize_neg


def nbsp_bounds(tree, weights):
    """``(T + 2T/W_black + 2G/W_red, W_red T + (W_black/2 + 2 W_red) G)``."""
    st = dtree.stats(tree)
    wb, wr = weights.black, weights.red
    return st.T + 2 * st.T / wb + 2 * st.G / wr, wr * st.T + (wb / 2 + 2 * wr) * st.G


# -- least-norm oracles -----------------------------------------------------

def least_norm_witnesses(sp_, x):
    """Smallest achievable ``(wsize+, wsize-)`` for ``x`` by direct optimization.

    Positive: pseudoinverse of ``A`` restricted to the available space.
    Negative: minimize ``||A^T wbar||`` over the affine space cut out by the
    orthogonality and target constraints.
    """
    tree = sp_.tree
    leaf, _ = dtree.evaluate(tree, x)
    t = sp_.target(leaf)
    if sp_.kind == "nbsp":
        Bx = _nbsp_available(sp_, x)
        img = sp_.A_hat @ Bx
        full = sp_.A.toarray()
    else:
        full = sp_.A.toarray()
        img = full[:, sp_.available(x)]
    c = np.linalg.pinv(img) @ t
    pos = float(c @ c)
    cons = [img.T]
    rhs = [np.zeros(img.shape[1])]
    for z in tree.leaves:
        cons.append(sp_.target(z)[None, :])
        rhs.append(np.array([0.0 if z == leaf else 1.0]))
    C, d = np.vstack(cons), np.concatenate(rhs)
    w0 = np.linalg.lstsq(C, d, rcond=None)[0]
    N = sla.null_space(C)
    if N.shape[1]:
        # absolute cutoff: directions in ker(A^T) leave the objective unchanged
        u, s, vt = np.linalg.svd(full.T @ N, full_matrices=False)
        keep = s > 1e-9
        y = vt[keep].T @ ((u[:, keep].T @ -(full.T @ w0)) / s[keep])
        w0 = w0 + N @ y
    return pos, float(np.sum((full.T @ w0) ** 2))


def max_witness_sizes(sp_, xs=None):
    """Largest witness sizes over ``xs`` (default: one input per reachable leaf)."""
    xs = dtree.leaf_inputs(sp_.tree).values() if xs is None else xs
    wp = wn = 0.0
    for x in xs:
        pair = witnesses(sp_, x, check=False)
        wp, wn = max(wp, pair.wsize_pos), max(wn, pair.wsize_neg)
    return wp, wn
