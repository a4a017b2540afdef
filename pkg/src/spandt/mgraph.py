"""Decision graph T~ and the matrix M~.

T~ turns every black path of a binary tree into a black cycle:

* ``E1``  tree edges not entering a red internal vertex or a black leaf
* ``E2``  ``(v^, v)`` black, for every internal ``v`` entered by a red edge
  (the root counts: it hangs from the synthetic vertex ``z0``)
* ``E3``  ``(v_p, v^)`` red; for the root this is ``r0 = (z0, v0^)``
* ``E4``  ``(z^, z)`` red, for every black leaf ``z``
* ``E5``  ``(z_p, z^)`` black
* ``E6``  ``(z_v^, v^)`` black, closing the cycle
* one pseudo-edge per red edge

Rows of M~ are T~ vertices; columns are ``[Root, Leaves..., black edges by
cycle, (red, pseudo) pairs]``.  Column images: Root ``a|z0>``, Leaf
``-a|z>``, black ``b(|u>-|v>)``, red ``g(|u>-|v>)``, pseudo ``g(|u>+|v>)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import dtree
from .dtree import BLACK, RED

ALWAYS = "always"
NEVER = "never"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class GEdge:
    tail: int
    head: int
    color: str
    cls: str     # "E1".."E6" or "pad"
    rule: object  # ALWAYS, NEVER or (j, label)


@dataclass
class Cycle:
    """One black cycle.  ``vertices[i] -> vertices[i+1]`` is black edge ``edges[i]``;
    ``f[i] = (red edge index, sign)`` is the rotated red coordinate tied to
    ``vertices[i]``: ``-`` for the red edge entering the hat vertex, ``+`` for a
    red edge leaving any other vertex."""

    vertices: tuple
    edges: tuple
    f: tuple
    path: int       # index into tree.black_paths()
    padding: int = 0

    def __len__(self):
        return len(self.vertices)


class ColumnIndex:
    """Bijection between column tags and positions.

    Tags: ``("root",)``, ``("leaf", z)``, ``("edge", u, v)``, ``("pseudo", u, v)``
    with ``u, v`` row ids of T~.
    """

    def __init__(self, tags):
        self.tags = tuple(tags)
        self.pos = {t: i for i, t in enumerate(self.tags)}
        if len(self.pos) != len(self.tags):
            raise GraphError("duplicate column tag")

    def __len__(self):
        return len(self.tags)

    def __getitem__(self, tag):
        return self.pos[tag]


class DecisionGraph:
    """T~ built from a binary :class:`~spandt.dtree.DecisionTree`.

    ``keys[r]`` names row ``r``: ``("z0",)``, ``("v", v)``, ``("hat", v)``,
    ``("zhat", z)``, and with padding ``("pad", c, i)`` / ``("stub", c, i)``.
    """

    def __init__(self, tree, pad_pow2=False):
        if not tree.is_binary:
            raise GraphError("decision graph needs a binary tree; binarize first")
        self.tree = tree
        self.pad_pow2 = pad_pow2
        self.keys, self.row = [], {}
        self.black, self.red, self.cycles = [], [], []
        self._build()
        self._index()

    # -- construction ----------------------------------------------------
    def _add(self, key):
        self.row[key] = len(self.keys)
        self.keys.append(key)
        return self.row[key]

    def _red(self, tail, head, cls, rule):
        self.red.append(GEdge(tail, head, RED, cls, rule))
        return len(self.red) - 1

    def _black(self, tail, head, cls, rule):
        self.black.append(GEdge(tail, head, BLACK, cls, rule))
        return len(self.black) - 1

    def _build(self):
        t = self.tree
        z0 = self._add(("z0",))
        for v in range(len(t)):
            self._add(("v", v))
        paths = t.black_paths()
        for p in paths:
            self._add(("hat", p[0]))
        for p in paths:
            self._add(("zhat", p[-1]))
        V = lambda v: self.row[("v", v)]

        def tree_rule(child):
            p, e = t.edge_to(child)
            return (t.query[p], e.label)

        # red edge entering each hat vertex
        entering = {}
        root_hat = self.row[("hat", t.root)]
        entering[t.root] = self._red(z0, root_hat, "E3", ALWAYS)
        for ci, p in enumerate(paths):
            top, leaf = p[0], p[-1]
            hat, zhat = self.row[("hat", top)], self.row[("zhat", leaf)]
            verts = [hat, *(V(v) for v in p[:-1]), zhat]
            edges = [self._black(hat, V(top), "E2",
                                 ALWAYS if top == t.root else tree_rule(top))]
            for a, b in zip(p[:-2], p[1:-1]):
                edges.append(self._black(V(a), V(b), "E1", tree_rule(b)))
            edges.append(self._black(V(p[-2]), zhat, "E5", tree_rule(leaf)))
            pad = 0
            if self.pad_pow2:
                pad = (1 << (len(verts) - 1).bit_length()) - len(verts)
            tail = zhat
            pads = []
            for i in range(pad):
                d = self._add(("pad", ci, i))
                edges.append(self._black(tail, d, "pad", NEVER))
                pads.append(d)
                tail = d
            edges.append(self._black(tail, hat, "E6", NEVER))
            f = [None]  # hat slot, filled once the entering edge exists
            for v in p[:-1]:
                (e,) = t.red_edges(v)
                c = e.child
                if t.is_leaf(c):
                    f.append((self._red(V(v), V(c), "E1", tree_rule(c)), "+"))
                else:
                    hc = self.row[("hat", c)]
                    entering[c] = self._red(V(v), hc, "E3", tree_rule(c))
                    f.append((entering[c], "+"))
            # E4 is free: the leaf below z^ is reached exactly when z^ is
            f.append((self._red(zhat, V(leaf), "E4", ALWAYS), "+"))
            for i, d in enumerate(pads):
                s = self._add(("stub", ci, i))
                f.append((self._red(d, s, "pad", NEVER), "+"))
            self.cycles.append(Cycle(tuple(verts + pads), tuple(edges), f, ci, pad))
        for cyc, p in zip(self.cycles, paths):
            cyc.f[0] = (entering[p[0]], "-")
            cyc.f = tuple(cyc.f)

    def _index(self):
        t = self.tree
        tags = [("root",)] + [("leaf", self.row[("v", z)]) for z in t.leaves]
        self.black_cols = []
        for cyc in self.cycles:
            for i in cyc.edges:
                e = self.black[i]
                self.black_cols.append(len(tags))
                tags.append(("edge", e.tail, e.head))
        # red edges: r0 first, then outgoing reds in cycle order
        order = [self.cycles[0].f[0][0]]
        for cyc in self.cycles:
            order += [i for i, s in cyc.f if s == "+"]
        if sorted(order) != list(range(len(self.red))):
            raise GraphError("red edge bookkeeping out of sync")
        self.red_col = [0] * len(self.red)
        for i in order:
            e = self.red[i]
            self.red_col[i] = len(tags)
            tags.append(("edge", e.tail, e.head))
            tags.append(("pseudo", e.tail, e.head))
        self.black_col = [0] * len(self.black)
        pos = 1 + len(t.leaves)
        for cyc in self.cycles:
            for i in cyc.edges:
                self.black_col[i] = pos
                pos += 1
        self.columns = ColumnIndex(tags)

    # -- queries ---------------------------------------------------------
    @property
    def n_rows(self):
        return len(self.keys)

    @property
    def n_cols(self):
        return len(self.columns)

    def leaf_col(self, z):
        return self.columns[("leaf", self.row[("v", z)])]

    def red_into(self, row):
        """Index of the red edge whose head is ``row``."""
        if not hasattr(self, "_red_head"):
            self._red_head = {e.head: i for i, e in enumerate(self.red)}
        try:
            return self._red_head[row]
        except KeyError:
            raise GraphError(f"no red edge enters row {row}") from None

    def edge_list(self):
        """All ``(column, GEdge, kind)`` with kind in {"edge", "pseudo"}."""
        out = [(self.black_col[i], e, "edge") for i, e in enumerate(self.black)]
        for i, e in enumerate(self.red):
            out.append((self.red_col[i], e, "edge"))
            out.append((self.red_col[i] + 1, e, "pseudo"))
        return sorted(out, key=lambda r: r[0])

    def cycle_betas(self, beta):
        """Per-cycle black scale: ``beta`` may be a scalar or one value per cycle."""
        beta = np.broadcast_to(np.asarray(beta, dtype=float), (len(self.cycles),))
        return beta


def build_decision_graph(tree, pad_pow2=False):
    return DecisionGraph(tree, pad_pow2=pad_pow2)


def _rule_ok(rule, x):
    if rule is ALWAYS:
        return True
    if rule is NEVER:
        return False
    j, lab = rule
    return x[j] in lab


def available_columns(dg, x):
    """Mask over columns: Root and Leaf always set, pseudo never, edges by rule."""
    x = dtree.check_input(dg.tree, x)
    mask = np.zeros(dg.n_cols, dtype=bool)
    mask[: 1 + len(dg.tree.leaves)] = True
    for i, e in enumerate(dg.black):
        mask[dg.black_col[i]] = _rule_ok(e.rule, x)
    for i, e in enumerate(dg.red):
        mask[dg.red_col[i]] = _rule_ok(e.rule, x)
    return mask


def assemble_matrix(dg, alpha, beta, gamma):
    """M~ as a sparse ``(rows, cols)`` array.  ``beta`` may be per cycle."""
    betas = dg.cycle_betas(beta)
    if not (alpha > 0 and gamma > 0 and np.all(betas > 0)):
        raise ValueError("alpha, beta and gamma must be positive")
    r, c, v = [dg.row[("z0",)]], [0], [alpha]
    for z in dg.tree.leaves:
        r.append(dg.row[("v", z)])
        c.append(dg.leaf_col(z))
        v.append(-alpha)
    for ci, cyc in enumerate(dg.cycles):
        for i in cyc.edges:
            e = dg.black[i]
            col = dg.black_col[i]
            r += [e.tail, e.head]
            c += [col, col]
            v += [betas[ci], -betas[ci]]
    for i, e in enumerate(dg.red):
        col = dg.red_col[i]
        r += [e.tail, e.head, e.tail, e.head]
        c += [col, col, col + 1, col + 1]
        v += [gamma, -gamma, gamma, gamma]
    return sp.csc_array((v, (r, c)), shape=(dg.n_rows, dg.n_cols))


# -- span program of T~ --------------------------------------------------------

def graph_path(dg, x):
    """Rows and edge columns of the T~ path from ``z0`` to the leaf of ``x``."""
    t = dg.tree
    leaf, _ = dtree.evaluate(t, x)
    path = dtree.root_path(t, leaf)
    V = lambda v: dg.row[("v", v)]
    rows = [dg.row[("z0",)], dg.row[("hat", t.root)], V(t.root)]
    edges = [("red", dg.red_into(rows[1])), ("black", _black_between(dg, rows[1], rows[2]))]
    for a, b in zip(path, path[1:]):
        color = t.parent_color[b]
        if color == RED and not t.is_leaf(b):
            mid = dg.row[("hat", b)]
            edges += [("red", dg.red_into(mid)), ("black", _black_between(dg, mid, V(b)))]
            rows += [mid, V(b)]
        elif color == BLACK and t.is_leaf(b):
            mid = dg.row[("zhat", b)]
            edges += [("black", _black_between(dg, V(a), mid)), ("red", dg.red_into(V(b)))]
            rows += [mid, V(b)]
        elif color == RED:
            edges.append(("red", dg.red_into(V(b))))
            rows.append(V(b))
        else:
            edges.append(("black", _black_between(dg, V(a), V(b))))
            rows.append(V(b))
    return leaf, rows, edges


def _black_between(dg, u, v):
    if not hasattr(dg, "_black_ends"):
        dg._black_ends = {(e.tail, e.head): i for i, e in enumerate(dg.black)}
    try:
        return dg._black_ends[(u, v)]
    except KeyError:
        raise GraphError(f"no black edge {u}->{v}") from None


@dataclass
class GraphWitness:
    leaf: int
    w: np.ndarray      # over columns of M~ (zero on Root/Leaf)
    wbar: np.ndarray   # over rows
    wsize_pos: float
    wsize_neg: float


def graph_witnesses(dg, x, beta, gamma, M=None):
    """Positive (path flow) and negative (path indicator) witnesses of the T~ program."""
    betas = dg.cycle_betas(beta)
    cyc_of = {}
    for ci, cyc in enumerate(dg.cycles):
        for i in cyc.edges:
            cyc_of[i] = ci
    leaf, rows, edges = graph_path(dg, x)
    w = np.zeros(dg.n_cols)
    for kind, i in edges:
        if kind == "red":
            w[dg.red_col[i]] = 1.0 / gamma
        else:
            w[dg.black_col[i]] = 1.0 / betas[cyc_of[i]]
    wbar = np.zeros(dg.n_rows)
    wbar[rows] = 1.0
    if M is None:
        M = assemble_matrix(dg, 1.0, betas, gamma)
    proj = M.T @ wbar
    proj[: 1 + len(dg.tree.leaves)] = 0.0
    return GraphWitness(leaf, w, wbar, float(w @ w), float(proj @ proj))


def graph_witness_sizes(dg, beta, gamma, xs=None):
    """Max witness sizes of the T~ program over ``xs`` (default: one input per leaf)."""
    xs = dtree.leaf_inputs(dg.tree).values() if xs is None else xs
    M = assemble_matrix(dg, 1.0, beta, gamma)
    wp = wn = 0.0
    for x in xs:
        g = graph_witnesses(dg, x, beta, gamma, M)
        wp, wn = max(wp, g.wsize_pos), max(wn, g.wsize_neg)
    return wp, wn


def reachable_leaves(dg, x):
    """Tree leaves reachable from ``z0`` along available edges of T~."""
    mask = available_columns(dg, x)
    out = {}
    for col, e, kind in dg.edge_list():
        if kind == "edge" and mask[col]:
            out.setdefault(e.tail, []).append(e.head)
    seen, stack = set(), [dg.row[("z0",)]]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(out.get(u, ()))
    return sorted(z for z in dg.tree.leaves if dg.row[("v", z)] in seen)


# -- triplet export ------------------------------------------------------------

def dump_triplets(M, fh=None):
    """Write ``M`` as text: header ``%triplets <rows> <cols> <nnz>`` then
    ``row col value`` lines (0-based, values with 17 significant digits)."""
    coo = sp.coo_array(M)
    out = io.StringIO() if fh is None else fh
    out.write(f"%triplets {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
    order = np.lexsort((coo.row, coo.col))
    for k in order:
        out.write(f"{coo.row[k]} {coo.col[k]} {format(float(coo.data[k]), '.17g')}\n")
    return out.getvalue() if fh is None else None


def load_triplets(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "%triplets":
        raise GraphError("missing %triplets header")
    nr, nc, nnz = (int(h) for h in head[1:4])
    data = np.array([ln.split() for ln in lines[1:]], dtype=float).reshape(-1, 3)
    if len(data) != nnz:
        raise GraphError(f"expected {nnz} entries, found {len(data)}")
    return sp.csc_array((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                        shape=(nr, nc))
