"""Colored decision trees.

A decision tree queries coordinates of an input word ``x`` over the alphabet
``{0, ..., ell-1}`` and follows the outgoing edge whose label contains the
answer.  Every internal vertex has exactly one black outgoing edge (the
guessing algorithm's prediction); the remaining edges are red.

Query indices are 0-based internally (vertex ``v`` reads ``x[query[v]]``).
The text interchange format uses 1-based ``Q=<j>`` as documented in
:func:`dumps`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

BLACK = "b"
RED = "r"

# Id of the synthetic vertex z_0 sitting above the user's root.
Z0 = -1


class TreeError(ValueError):
    """Structural violation in a decision tree."""


class InputError(ValueError):
    """Malformed input word."""


class NotFoundError(KeyError):
    pass


class BlackPathError(ValueError):
    """Vertex does not lie on any black path."""


@dataclass(frozen=True)
class Edge:
    child: int
    label: frozenset
    color: str


@dataclass(frozen=True)
class TreeStats:
    T: int
    G: int


@dataclass(frozen=True)
class LocalView:
    kind: str  # "root" | "internal" | "leaf"
    parent: int | None
    parent_color: str | None
    children: tuple  # of (child, label, color)
    query: int | None = None
    leaf_label: int | None = None


class DecisionTree:
    """Immutable colored decision tree with dense integer vertex ids.

    Build one with :class:`TreeBuilder`.  ``origin`` optionally maps each
    vertex to a vertex of another tree (set by :func:`binarize`).
    """

    def __init__(self, n, ell, m, root, query, edges, leaf_label, origin=None):
        self.n = int(n)
        self.ell = int(ell)
        self.m = int(m)
        self.root = int(root)
        self.query = tuple(query)
        self.edges = tuple(tuple(e) for e in edges)
        self.leaf_label = tuple(leaf_label)
        self.origin = None if origin is None else tuple(origin)
        nv = len(self.query)
        parent = [None] * nv
        parent_color = [None] * nv
        for v, out in enumerate(self.edges):
            for e in out:
                if parent[e.child] is not None:
                    raise TreeError(f"vertex {e.child} has two parents")
                parent[e.child] = v
                parent_color[e.child] = e.color
        self.parent = tuple(parent)
        self.parent_color = tuple(parent_color)
        self._validate()
        self._paths = None

    # -- structure -------------------------------------------------------
    def __len__(self):
        return len(self.query)

    @property
    def num_vertices(self):
        return len(self.query)

    def is_leaf(self, v):
        return self.query[v] < 0

    @property
    def internal(self):
        return [v for v in range(len(self)) if not self.is_leaf(v)]

    @property
    def leaves(self):
        return [v for v in range(len(self)) if self.is_leaf(v)]

    @property
    def is_binary(self):
        return all(len(self.edges[v]) == 2 for v in self.internal)

    def black_child(self, v):
        for e in self.edges[v]:
            if e.color == BLACK:
                return e.child
        raise TreeError(f"vertex {v} has no black edge")

    def red_edges(self, v):
        return [e for e in self.edges[v] if e.color == RED]

    def edge_to(self, child):
        """The edge entering ``child`` from its parent."""
        p = self.parent[child]
        if p is None:
            raise TreeError("the root has no parent edge")
        for e in self.edges[p]:
            if e.child == child:
                return p, e
        raise AssertionError("parent table out of sync")

    def _validate(self):
        nv = len(self.query)
        if not (len(self.edges) == len(self.leaf_label) == nv):
            raise TreeError("per-vertex tables differ in length")
        if not 0 <= self.root < nv:
            raise TreeError("root id out of range")
        if self.parent[self.root] is not None:
            raise TreeError("root has a parent")
        if self.is_leaf(self.root):
            raise TreeError("the root must be an internal vertex (T >= 1)")
        alphabet = frozenset(range(self.ell))
        for v in range(nv):
            if v != self.root and self.parent[v] is None:
                raise TreeError(f"vertex {v} is not attached to the tree")
            out = self.edges[v]
            if self.is_leaf(v):
                if out:
                    raise TreeError(f"leaf {v} has children")
                if self.leaf_label[v] is None or not 0 <= self.leaf_label[v] < self.m:
                    raise TreeError(f"leaf {v} has label outside [m]")
                continue
            if not 0 <= self.query[v] < self.n:
                raise TreeError(f"vertex {v} queries index outside [n]")
            if not out:
                raise TreeError(f"internal vertex {v} has no children")
            seen = set()
            for e in out:
                if not e.label:
                    raise TreeError(f"edge {v}->{e.child} has an empty label")
                if seen & e.label:
                    raise TreeError(f"labels at vertex {v} overlap")
                seen |= e.label
                if e.color not in (BLACK, RED):
                    raise TreeError(f"unknown color {e.color!r}")
            if seen != alphabet:
                raise TreeError(f"labels at vertex {v} do not cover the alphabet")
            if sum(e.color == BLACK for e in out) != 1:
                raise TreeError(f"vertex {v} must have exactly one black edge")
        # every vertex reachable from the root, no cycles
        stack, count = [self.root], 0
        while stack:
            v = stack.pop()
            count += 1
            if count > nv:
                raise TreeError("cycle detected")
            stack.extend(e.child for e in self.edges[v])
        if count != nv:
            raise TreeError("tree is disconnected")

    # -- black paths -----------------------------------------------------
    def _black_paths(self):
        if self._paths is None:
            paths, where = [], {}
            for top in range(len(self)):
                if self.is_leaf(top):
                    continue
                if self.parent[top] is not None and self.parent_color[top] == BLACK:
                    continue
                path, v = [], top
                while True:
                    where[v] = (len(paths), len(path))
                    path.append(v)
                    if self.is_leaf(v):
                        break
                    v = self.black_child(v)
                paths.append(tuple(path))
            self._paths = (paths, where)
        return self._paths

    def black_paths(self):
        """All maximal black paths, each ordered from its top vertex to its black leaf."""
        return list(self._black_paths()[0])


class TreeBuilder:
    """Incremental construction of a :class:`DecisionTree`.

    >>> b = TreeBuilder(n=1, ell=2, m=2)
    >>> v = b.internal(0)
    >>> b.edge(v, b.leaf(0), {0}, "b"); b.edge(v, b.leaf(1), {1}, "r")
    >>> b.build().num_vertices
    3
    """

    def __init__(self, n, ell, m):
        self.n, self.ell, self.m = n, ell, m
        self.query, self.edges, self.labels, self.origin = [], [], [], []

    def internal(self, j, origin=None):
        self.query.append(int(j))
        self.edges.append([])
        self.labels.append(None)
        self.origin.append(origin)
        return len(self.query) - 1

    def leaf(self, label, origin=None):
        self.query.append(-1)
        self.edges.append([])
        self.labels.append(int(label))
        self.origin.append(origin)
        return len(self.query) - 1

    def edge(self, parent, child, label, color):
        self.edges[parent].append(Edge(child, frozenset(label), color))

    def build(self, root=None):
        if root is None:
            has_parent = {e.child for out in self.edges for e in out}
            roots = [v for v in range(len(self.query)) if v not in has_parent]
            if len(roots) != 1:
                raise TreeError(f"expected one root, found {len(roots)}")
            root = roots[0]
        origin = None if all(o is None for o in self.origin) else self.origin
        return DecisionTree(self.n, self.ell, self.m, root, self.query, self.edges,
                            self.labels, origin)


# -- operations -------------------------------------------------------------

def check_input(tree, x):
    x = tuple(int(q) for q in x)
    if len(x) != tree.n:
        raise InputError(f"expected {tree.n} symbols, got {len(x)}")
    bad = [q for q in x if not 0 <= q < tree.ell]
    if bad:
        raise InputError(f"symbol {bad[0]} outside alphabet of size {tree.ell}")
    return x


def next_vertex(tree, v, x):
    q = x[tree.query[v]]
    for e in tree.edges[v]:
        if q in e.label:
            return e
    raise AssertionError("partition property violated")


def evaluate(tree, x):
    """Follow ``x`` from the root; return ``(leaf, transcript)``.

    Transcript entries are ``(vertex, queried_index, answer, color)``.
    """
    x = check_input(tree, x)
    v, transcript = tree.root, []
    while not tree.is_leaf(v):
        e = next_vertex(tree, v, x)
        transcript.append((v, tree.query[v], x[tree.query[v]], e.color))
        v = e.child
    return v, transcript


def root_path(tree, leaf):
    """Vertices from the root down to ``leaf`` (inclusive)."""
    path = [leaf]
    while tree.parent[path[-1]] is not None:
        path.append(tree.parent[path[-1]])
    return path[::-1]


def stats(tree):
    depth = [0] * len(tree)
    reds = [0] * len(tree)
    stack = [tree.root]
    while stack:
        v = stack.pop()
        for e in tree.edges[v]:
            depth[e.child] = depth[v] + 1
            reds[e.child] = reds[v] + (e.color == RED)
            stack.append(e.child)
    leaves = tree.leaves
    return TreeStats(T=max(depth[z] for z in leaves), G=max(reds[z] for z in leaves))


def local(tree, v, synthetic_root=False):
    """Local structure around ``v``; O(degree).

    With ``synthetic_root`` the user's root is reported as an internal vertex
    hanging from :data:`Z0` by a red edge.
    """
    if not 0 <= v < len(tree):
        raise NotFoundError(v)
    children = tuple((e.child, e.label, e.color) for e in tree.edges[v])
    parent, pcolor = tree.parent[v], tree.parent_color[v]
    if tree.is_leaf(v):
        return LocalView("leaf", parent, pcolor, (), leaf_label=tree.leaf_label[v])
    if v == tree.root:
        if synthetic_root:
            return LocalView("internal", Z0, RED, children, query=tree.query[v])
        return LocalView("root", None, None, children, query=tree.query[v])
    return LocalView("internal", parent, pcolor, children, query=tree.query[v])


def black_path(tree, v, k=None):
    """Length of the black path through ``v``, or its ``k``-th vertex (1-indexed)."""
    if not 0 <= v < len(tree):
        raise NotFoundError(v)
    paths, where = tree._black_paths()
    if v not in where:
        raise BlackPathError(f"vertex {v} is a leaf reached by a red edge")
    path = paths[where[v][0]]
    if k is None:
        return len(path)
    if not 1 <= k <= len(path):
        raise IndexError(f"k={k} outside 1..{len(path)}")
    return path[k - 1]


def binarize(tree):
    """Convert to a tree whose internal vertices all have two children.

    The black edge of each vertex is kept.  The red edges, ordered by the
    smallest symbol in their labels, hang below a single red edge as a
    left-complete balanced subtree querying the same index; in that subtree
    the larger half is black.  Vertices with a single (black) child are
    contracted.  ``origin`` of the result maps every vertex to the vertex of
    ``tree`` it copies, or ``-1`` for the inserted subtree vertices.
    """
    b = TreeBuilder(tree.n, tree.ell, tree.m)
    alphabet = frozenset(range(tree.ell))

    def skip(v):
        while not tree.is_leaf(v) and len(tree.edges[v]) == 1:
            v = tree.edges[v][0].child
        return v

    def copy(v):
        v = skip(v)
        if tree.is_leaf(v):
            return b.leaf(tree.leaf_label[v], origin=v)
        nv = b.internal(tree.query[v], origin=v)
        j = tree.query[v]
        black = next(e for e in tree.edges[v] if e.color == BLACK)
        reds = sorted(tree.red_edges(v), key=lambda e: min(e.label))
        b.edge(nv, copy(black.child), black.label, BLACK)
        b.edge(nv, split(j, reds), frozenset().union(*(e.label for e in reds)), RED)
        return nv

    def split(j, reds):
        if len(reds) == 1:
            return copy(reds[0].child)
        w = b.internal(j, origin=-1)
        half = (len(reds) + 1) // 2
        left, right = reds[:half], reds[half:]
        right_label = frozenset().union(*(e.label for e in right))
        # symbols excluded higher up are unreachable here; park them on the black side
        b.edge(w, split(j, left), alphabet - right_label, BLACK)
        b.edge(w, split(j, right), right_label, RED)
        return w

    root = copy(tree.root)
    return b.build(root=root)


def leaf_origin(binarized, z):
    """Leaf of the source tree that leaf ``z`` of a binarized tree stands for."""
    return binarized.origin[z]


# -- stock trees ------------------------------------------------------------

def first_marked_tree(n):
    """Tree for the index of the first 1 in ``x`` (0 when none), guessing 0 each time.

    Ids: ``v_i = i`` for ``i < n``; leaf ``z_i = n + i - 1`` for ``1 <= i <= n+1``
    with label ``i`` (``z_{n+1}`` carries label 0).
    """
    if n < 1:
        raise TreeError("n must be at least 1")
    b = TreeBuilder(n=n, ell=2, m=n + 1)
    vs = [b.internal(i) for i in range(n)]
    zs = [b.leaf(i + 1) for i in range(n)] + [b.leaf(0)]
    for i in range(n):
        b.edge(vs[i], zs[i], {1}, RED)
        b.edge(vs[i], vs[i + 1] if i + 1 < n else zs[n], {0}, BLACK)
    return b.build(root=0)


def random_binary_tree(n, rng, leaf_prob=0.25, max_depth=None):
    """Random binary tree; no index is queried twice on a root-leaf path."""
    rng = np.random.default_rng(rng)
    max_depth = n if max_depth is None else min(max_depth, n)
    leaves = []
    b = TreeBuilder(n=n, ell=2, m=1)

    def grow(depth, unused):
        if depth > 0 and (depth >= max_depth or rng.random() < leaf_prob):
            leaves.append(b.leaf(0))
            return leaves[-1]
        j = int(rng.choice(sorted(unused)))
        v = b.internal(j)
        guess = int(rng.integers(2))
        for q in (0, 1):
            child = grow(depth + 1, unused - {j})
            b.edge(v, child, {q}, BLACK if q == guess else RED)
        return v

    grow(0, frozenset(range(n)))
    for i, z in enumerate(leaves):
        b.labels[z] = i
    b.m = len(leaves)
    return b.build(root=0)


def random_partition(ell, parts, rng):
    symbols = list(rng.permutation(ell))
    cuts = sorted(rng.choice(np.arange(1, ell), size=parts - 1, replace=False)) if parts > 1 else []
    bounds = [0, *cuts, ell]
    return [frozenset(int(s) for s in symbols[a:b]) for a, b in zip(bounds, bounds[1:])]


def random_tree(n, ell, rng, leaf_prob=0.3, max_depth=None, min_degree=2, max_degree=None):
    """Random generalized tree with label partitions of ``{0..ell-1}``."""
    rng = np.random.default_rng(rng)
    max_depth = n if max_depth is None else min(max_depth, n)
    max_degree = ell if max_degree is None else min(max_degree, ell)
    leaves = []
    b = TreeBuilder(n=n, ell=ell, m=1)

    def grow(depth, unused):
        if depth > 0 and (depth >= max_depth or rng.random() < leaf_prob):
            leaves.append(b.leaf(0))
            return leaves[-1]
        j = int(rng.choice(sorted(unused)))
        v = b.internal(j)
        parts = int(rng.integers(min_degree, max_degree + 1))
        labels = random_partition(ell, parts, rng)
        black = int(rng.integers(parts))
        for i, lab in enumerate(labels):
            b.edge(v, grow(depth + 1, unused - {j}), lab, BLACK if i == black else RED)
        return v

    grow(0, frozenset(range(n)))
    for i, z in enumerate(leaves):
        b.labels[z] = i
    b.m = len(leaves)
    return b.build(root=0)


def all_inputs(n, ell=2):
    """Every word of ``[ell]^n`` in lexicographic order."""
    import itertools
    return itertools.product(range(ell), repeat=n)


def leaf_inputs(tree):
    """One representative input per reachable leaf.

    Unqueried coordinates are 0; a queried coordinate takes the smallest
    symbol allowed by every label on the path.  Leaves no input reaches are
    omitted.
    """
    out = {}
    for z in tree.leaves:
        allowed = {}
        path = root_path(tree, z)
        for v, c in zip(path, path[1:]):
            _, e = tree.edge_to(c)
            j = tree.query[v]
            allowed[j] = allowed.get(j, e.label) & e.label
        if all(allowed.values()):
            x = [0] * tree.n
            for j, lab in allowed.items():
                x[j] = min(lab)
            out[z] = tuple(x)
    return out


# -- text format ------------------------------------------------------------

_HEADER = re.compile(r"^tree\s+n=(\d+)\s+l=(\d+)\s+m=(\d+)\s*$")
_VERTEX = re.compile(r"^(\d+)\s+(?:Q=(\d+)|LEAF=(\d+))\s*$")
_EDGE = re.compile(r"^(\d+)\s*->\s*(\d+)\s+label=\{([\d,\s]*)\}\s+color=([br])\s*$")


def dumps(tree):
    """Serialize to the line-oriented tree format.

    Grammar (one item per line, ``#`` starts a comment)::

        tree n=<n> l=<ell> m=<m>
        <id> Q=<j>                                   # internal, 1 <= j <= n
        <id> LEAF=<label>                            # leaf, 0 <= label < m
        <parent> -> <child> label={q1,q2,...} color=<b|r>
    """
    lines = [f"tree n={tree.n} l={tree.ell} m={tree.m}"]
    for v in range(len(tree)):
        if tree.is_leaf(v):
            lines.append(f"{v} LEAF={tree.leaf_label[v]}")
        else:
            lines.append(f"{v} Q={tree.query[v] + 1}")
    for v in range(len(tree)):
        for e in tree.edges[v]:
            lab = ",".join(str(q) for q in sorted(e.label))
            lines.append(f"{v} -> {e.child} label={{{lab}}} color={e.color}")
    return "\n".join(lines) + "\n"


def loads(text):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise TreeError("empty tree file")
    head = _HEADER.match(lines[0])
    if not head:
        raise TreeError(f"bad header: {lines[0]!r}")
    n, ell, m = (int(g) for g in head.groups())
    verts, edges = {}, []
    for ln in lines[1:]:
        if (mt := _VERTEX.match(ln)):
            vid = int(mt.group(1))
            if vid in verts:
                raise TreeError(f"vertex {vid} declared twice")
            if mt.group(2) is not None:
                j = int(mt.group(2))
                if not 1 <= j <= n:
                    raise TreeError(f"query index {j} outside 1..{n}")
                verts[vid] = ("Q", j - 1)
            else:
                verts[vid] = ("LEAF", int(mt.group(3)))
        elif (mt := _EDGE.match(ln)):
            lab = [int(q) for q in mt.group(3).replace(" ", "").split(",") if q]
            edges.append((int(mt.group(1)), int(mt.group(2)), lab, mt.group(4)))
        else:
            raise TreeError(f"unparseable line: {ln!r}")
    if sorted(verts) != list(range(len(verts))):
        raise TreeError("vertex ids must be 0..N-1")
    b = TreeBuilder(n, ell, m)
    for vid in range(len(verts)):
        kind, val = verts[vid]
        (b.internal if kind == "Q" else b.leaf)(val)
    for p, c, lab, col in edges:
        if p not in verts or c not in verts:
            raise TreeError(f"edge {p}->{c} references an unknown vertex")
        b.edge(p, c, lab, col)
    return b.build()
