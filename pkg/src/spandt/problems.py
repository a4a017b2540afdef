"""Frontends: decision trees built from classical graph algorithms.

Inputs are adjacency matrices flattened row-major, so query ``(u, v)`` is
index ``u * n + v`` (0-based vertices).  A lazy tree's vertices are
algorithm states; children are generated on demand.  Every position the
pseudocode visits is a tree vertex.  A query whose answer cannot change the
state (the target already discovered, already matched, a self pair, or a pair
whose answer is already known) gets a single black edge labelled ``{0, 1}``;
binarization contracts those vertices away.

States are pointer encodings in the spirit of the classical algorithms: a
few integer pointers plus lists that only grow at their tail.  Every list
cell or pointer the subroutines touch is counted in an :class:`OpCounter`.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace

from . import dtree
from .dtree import BLACK, RED

BOTH = frozenset((0, 1))
ZERO, ONE = frozenset((0,)), frozenset((1,))


class GraphFormatError(ValueError):
    pass


# -- graphs ----------------------------------------------------------------------

@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``."""

    n: int
    edges: frozenset  # of (u, v) with u < v

    @classmethod
    def from_edges(cls, n, edges):
        es = set()
        for u, v in edges:
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge ({u}, {v}) outside 0..{n - 1}")
            es.add((min(u, v), max(u, v)))
        return cls(n, frozenset(es))

    def adjacent(self, u, v):
        return (min(u, v), max(u, v)) in self.edges

    def neighbors(self, u):
        return [v for v in range(self.n) if v != u and self.adjacent(u, v)]

    def to_input(self):
        n = self.n
        return tuple(int(self.adjacent(u, v)) if u != v else 0 for u in range(n) for v in range(n))


def parse_graph(text):
    """Adjacency matrix (``n`` then ``n`` rows of 0/1) or edge list
    (``n m`` then ``m`` lines ``u v``, 1-indexed)."""
    lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphFormatError("empty graph file")
    try:
        head = [int(t) for t in lines[0]]
        body = [[int(t) for t in ln] for ln in lines[1:]]
    except ValueError as exc:
        raise GraphFormatError(f"non-integer token: {exc}") from None
    if len(head) == 1:
        n = head[0]
        if n < 1 or len(body) != n or any(len(r) != n for r in body):
            raise GraphFormatError("adjacency matrix must have n rows of n entries")
        if any(q not in (0, 1) for r in body for q in r):
            raise GraphFormatError("adjacency entries must be 0 or 1")
        for u in range(n):
            if body[u][u]:
                raise GraphFormatError(f"self-loop at vertex {u + 1}")
            for v in range(n):
                if body[u][v] != body[v][u]:
                    raise GraphFormatError("adjacency matrix must be symmetric")
        return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n) if body[u][v]])
    if len(head) == 2:
        n, m = head
        if n < 1 or m < 0 or len(body) != m or any(len(r) != 2 for r in body):
            raise GraphFormatError("edge list must have m lines of two vertex ids")
        for u, v in body:
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}")
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphFormatError(f"vertex id outside 1..{n}")
        return Graph.from_edges(n, [(u - 1, v - 1) for u, v in body])
    raise GraphFormatError("first line must be 'n' or 'n m'")


def load_graph(path):
    with open(path) as fh:
        return parse_graph(fh.read())


def all_graphs(n):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield Graph.from_edges(n, [p for k, p in enumerate(pairs) if mask >> k & 1])


def random_graph(n, p, rng):
    pairs = itertools.combinations(range(n), 2)
    return Graph.from_edges(n, [q for q in pairs if rng.random() < p])


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


# -- classical references ------------------------------------------------------------

def bfs_forest(g):
    """Textbook BFS forest; roots and neighbours in ascending order.

    Returns tree edges ``(parent, child)``, 1-indexed, in discovery order.
    """
    seen, out = [False] * g.n, []
    for r in range(g.n):
        if seen[r]:
            continue
        seen[r] = True
        dq = deque([r])
        while dq:
            u = dq.popleft()
            for v in g.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    out.append((u + 1, v + 1))
                    dq.append(v)
    return tuple(out)


def is_bipartite(g):
    color = [None] * g.n
    for s in range(g.n):
        if color[s] is not None:
            continue
        color[s] = 0
        stack = [s]
        while stack:
            u = stack.pop()
            for v in g.neighbors(u):
                if color[v] is None:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def has_cycle(g):
    parent = list(range(g.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in sorted(g.edges):
        a, b = find(u), find(v)
        if a == b:
            return True
        parent[a] = b
    return False


def greedy_matching(g):
    """Greedy matching scanning pairs ``(i, j)``, ``i < j``, ascending; 1-indexed."""
    used, out = [False] * g.n, []
    for i in range(g.n):
        for j in range(i + 1, g.n):
            if g.adjacent(i, j) and not used[i] and not used[j]:
                used[i] = used[j] = True
                out.append((i + 1, j + 1))
    return tuple(out)


def is_maximal_matching(g, matching):
    used = set()
    for a, b in matching:
        if not g.adjacent(a - 1, b - 1) or a in used or b in used:
            return False
        used |= {a, b}
    return all(u + 1 in used or v + 1 in used for u, v in g.edges)


def first_marked(x):
    for i, q in enumerate(x):
        if q:
            return i + 1
    return 0


def classical_reference(problem, g):
    if problem == "first-marked":
        return first_marked(g)
    table = {"bfs": bfs_forest, "bipartite": is_bipartite, "cycle": has_cycle,
             "matching": greedy_matching}
    if problem not in table:
        raise ValueError(f"unknown problem {problem!r}")
    return table[problem](g)


# -- lazy trees --------------------------------------------------------------------

@dataclass
class OpCounter:
    reads: int = 0
    writes: int = 0

    @property
    def total(self):
        return self.reads + self.writes

    def reset(self):
        self.reads = self.writes = 0


@dataclass(frozen=True)
class LazyLocal:
    kind: str                 # "root" | "internal" | "leaf"
    parent: object
    parent_color: str | None
    children: tuple           # (child state, label, color)
    query: int | None = None


@dataclass
class Materialized:
    tree: dtree.DecisionTree
    states: list              # tree vertex -> lazy state
    answers: list             # leaf label -> PostProcess output

    def decode(self, label):
        return self.answers[label]


class LazyTree:
    """Decision tree whose vertices are algorithm states.

    Subclasses provide ``root``, ``query`` (``None`` at leaves), ``useful``,
    ``advance`` (the black move), ``take`` (the red move), ``parent`` and
    ``output``.
    """

    name = "lazy"

    def __init__(self, n):
        if n < 2:
            raise ValueError("graph frontends need n >= 2")
        self.n = n
        self.n_vars = n * n
        self.ops = OpCounter()

    # children in the decision tree
    def children(self, s):
        if self.useful(s):
            return ((self.advance(s), ZERO, BLACK), (self.take(s), ONE, RED))
        return ((self.advance(s), BOTH, BLACK),)

    def black_child(self, s):
        return self.advance(s)

    def local(self, s):
        j = self.query(s)
        p = self.parent(s)
        pc = None if p is None else self.edge_color(p, s)
        kids = () if j is None else self.children(s)
        kind = "leaf" if j is None else ("root" if p is None else "internal")
        return LazyLocal(kind, p, pc, kids, j)

    def edge_color(self, p, s):
        for c, _, color in self.children(p):
            if c == s:
                return color
        raise AssertionError("parent does not list the child")

    def evaluate(self, x):
        s, transcript = self.root(), []
        while (j := self.query(s)) is not None:
            if self.useful(s) and x[j]:
                transcript.append((j, 1, RED))
                s = self.take(s)
            else:
                transcript.append((j, x[j], BLACK))
                s = self.advance(s)
        return s, transcript

    def black_path(self, s, k=None):
        """Length of the black path through ``s``, or its ``k``-th state (1-indexed)."""
        if self.query(s) is None and self.parent(s) is not None and self.edge_color(self.parent(s), s) == RED:
            raise dtree.BlackPathError("leaf reached by a red edge")
        top = self.path_top(s)
        length = self.path_length(top)
        if k is None:
            return length
        if not 1 <= k <= length:
            raise IndexError(f"k={k} outside 1..{length}")
        return self.jump(top, k - 1)

    def materialize(self, limit=200_000):
        b = dtree.TreeBuilder(self.n_vars, 2, 1)
        states, answers, index = [], [], {}

        def add(s):
            j = self.query(s)
            if j is None:
                out = self.output(s)
                if out not in index:
                    index[out] = len(answers)
                    answers.append(out)
                v = b.leaf(index[out])
            else:
                v = b.internal(j)
            states.append(s)
            if len(states) > limit:
                raise MemoryError(f"tree exceeds {limit} vertices")
            return v

        root = add(self.root())
        stack = [(root, self.root())]
        while stack:
            v, s = stack.pop()
            if self.query(s) is None:
                continue
            for c, lab, color in self.children(s):
                w = add(c)
                b.edge(v, w, lab, color)
                stack.append((w, c))
        b.m = max(1, len(answers))
        return Materialized(b.build(root), states, answers)


# -- BFS family ----------------------------------------------------------------------

@dataclass(frozen=True)
class BfsState:
    """Pointers ``rho`` (current component root), ``at_root``, ``qf`` (queue
    front), ``i`` (the V pointer) and ``scan`` plus the lists ``L``, ``Q``,
    ``ES`` and the per-vertex tables ``H`` (height), ``C`` (component root),
    ``P`` (BFS parent) and ``pos`` (queue position) written on red moves."""

    phase: str          # "bfs", "scan" or "done"
    rho: int
    at_root: bool
    qf: int
    i: int
    L: tuple
    Q: tuple
    ES: tuple
    H: tuple
    C: tuple
    P: tuple
    pos: tuple
    scan: int = 0
    found: bool = False


class BfsTree(LazyTree):
    """Queue-based BFS as a lazy tree, restarting at the smallest undiscovered
    vertex when the queue empties.  ``mode`` adds a scan for an odd-cycle
    edge (``"bipartite"``) or for any non-tree edge (``"cycle"``)."""

    def __init__(self, n, mode="bfs"):
        super().__init__(n)
        if mode not in ("bfs", "bipartite", "cycle"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.name = mode

    def root(self):
        n = self.n
        z = (0,) * n
        return BfsState("bfs", 0, True, 0, 0, z, (), (), z, tuple(range(n)), (None,) * n, (-1,) * n)

    # -- pointer helpers
    def row(self, s):
        self.ops.reads += 2
        return s.rho if s.at_root else s.Q[s.qf]

    def discovered(self, s, v):
        self.ops.reads += 2
        return bool(s.L[v]) or v <= s.rho

    def query(self, s):
        if s.phase == "done":
            return None
        if s.phase == "bfs":
            return self.row(s) * self.n + s.i
        return s.scan

    def useful(self, s):
        if s.phase == "bfs":
            return s.i != self.row(s) and not self.discovered(s, s.i)
        if s.phase == "scan":
            a, b = divmod(s.scan, self.n)
            if a >= b:
                return False
            self.ops.reads += 2
            if s.C[a] != s.C[b]:
                return False
            if self.mode == "bipartite":
                self.ops.reads += 2
                return s.H[a] == s.H[b]
            return self._unknown(s, a, b)
        return False

    def _order(self, s, v):
        self.ops.reads += 1
        return -1 if s.P[v] is None else s.pos[v]

    def _unknown(self, s, a, b):
        """Pair never queried during the search (a non-tree edge candidate)."""
        u, w = (a, b) if self._order(s, a) < self._order(s, b) else (b, a)
        self.ops.reads += 1
        return self._order(s, s.P[w]) < self._order(s, u)

    def advance(self, s):
        """Black move: only pointers change (a restart moves ``rho``)."""
        n = self.n
        if s.phase == "scan":
            self.ops.writes += 1
            if s.scan + 1 < n * n:
                return replace(s, scan=s.scan + 1)
            return replace(s, phase="done", scan=0)
        self.ops.writes += 1
        if s.i + 1 < n:
            return replace(s, i=s.i + 1)
        return self._next_row(s)

    def _next_row(self, s):
        qf = s.qf if s.at_root else s.qf + 1
        self.ops.reads += 1
        self.ops.writes += 2
        if qf < len(s.Q):
            return replace(s, at_root=False, qf=qf, i=0)
        r = s.rho + 1
        while r < self.n and s.L[r]:
            self.ops.reads += 1
            r += 1
        if r < self.n:
            return replace(s, rho=r, at_root=True, qf=qf, i=0)
        if self.mode == "bfs":
            return replace(s, phase="done", at_root=False, qf=qf, i=0)
        return replace(s, phase="scan", at_root=False, qf=qf, i=0, scan=0)

    def take(self, s):
        """Red move."""
        if s.phase == "scan":
            self.ops.writes += 1
            return replace(s, phase="done", found=True)
        u, v = self.row(s), s.i
        self.ops.reads += 2
        self.ops.writes += 7
        t = replace(
            s,
            L=_set(s.L, v, 1), Q=s.Q + (v,), ES=s.ES + ((u, v),),
            H=_set(s.H, v, s.H[u] + 1), C=_set(s.C, v, s.C[u]),
            P=_set(s.P, v, u), pos=_set(s.pos, v, len(s.Q)),
        )
        return self.advance(t)

    def _undo(self, s, u, v):
        """Remove the red move ``(u, v)`` at the list tails."""
        self.ops.writes += 7
        return replace(s, L=_set(s.L, v, 0), Q=s.Q[:-1], ES=s.ES[:-1], H=_set(s.H, v, 0),
                       C=_set(s.C, v, v), P=_set(s.P, v, None), pos=_set(s.pos, v, -1))

    def _prev_row(self, s):
        """Pointers of the row processed before the current one, or ``None``."""
        n = self.n
        if not s.at_root:
            self.ops.reads += 2
            if s.qf > 0 and s.C[s.Q[s.qf - 1]] == s.rho:
                return replace(s, qf=s.qf - 1, i=n - 1)
            return replace(s, at_root=True, i=n - 1)
        if s.rho == 0:
            return None
        r = s.rho - 1
        while s.L[r]:
            self.ops.reads += 1
            r -= 1
        self.ops.reads += 2
        if s.qf > 0 and s.C[s.Q[s.qf - 1]] == r:
            return replace(s, rho=r, at_root=False, qf=s.qf - 1, i=n - 1)
        return replace(s, rho=r, at_root=True, i=n - 1)

    def _last_bfs(self, s):
        """Final search position, from the pointers left after the search."""
        n = self.n
        self.ops.reads += 2
        if s.Q and s.C[s.Q[-1]] == s.rho:
            return replace(s, phase="bfs", at_root=False, qf=len(s.Q) - 1, i=n - 1, scan=0, found=False)
        return replace(s, phase="bfs", at_root=True, i=n - 1, scan=0, found=False)

    def parent(self, s):
        if s.phase == "scan" or (s.phase == "done" and (s.found or self.mode != "bfs")):
            if s.phase == "done" and s.found:
                self.ops.writes += 1
                return replace(s, phase="scan", found=False)
            if s.phase == "done":
                return replace(s, phase="scan", scan=self.n * self.n - 1)
            if s.scan > 0:
                self.ops.writes += 1
                return replace(s, scan=s.scan - 1)
            p = self._last_bfs(s)
        elif s.phase == "done":
            p = self._last_bfs(s)
        elif s.i > 0:
            self.ops.writes += 1
            p = replace(s, i=s.i - 1)
        else:
            p = self._prev_row(s)
            if p is None:
                return None
        u = self.row(p)
        self.ops.reads += 1
        if p.ES and p.ES[-1] == (u, p.i):
            return self._undo(p, u, p.i)
        return p

    def output(self, s):
        if self.mode == "bfs":
            return tuple((u + 1, v + 1) for u, v in s.ES)
        if self.mode == "bipartite":
            return not s.found
        return s.found

    # -- black paths
    def path_top(self, s):
        """First state after the last red move (or the root)."""
        if s.phase == "done" and s.found:
            raise dtree.BlackPathError("leaf reached by a red edge")
        if not s.ES:
            return self.root()
        u, v = s.ES[-1]
        self.ops.reads += 3
        base = replace(s, phase="bfs", scan=0, found=False, i=v)
        if s.P[u] is None:       # u is a component root
            first = next((k for k, w in enumerate(s.Q) if s.C[w] == u), len(s.Q))
            self.ops.reads += 1
            t = replace(base, rho=u, at_root=True, qf=first)
        else:
            t = replace(base, rho=s.C[u], at_root=False, qf=s.pos[u])
        return self.advance(t)

    def _rows_after(self, s):
        """Rows still to come after the current one on a black run."""
        if s.phase != "bfs":
            return 0
        q_rows = len(s.Q) - (s.qf if s.at_root else s.qf + 1)
        roots = sum(1 for r in range(s.rho + 1, self.n) if not s.L[r])
        self.ops.reads += 2
        return q_rows + roots

    def path_length(self, top):
        n = self.n
        scan = n * n if self.mode != "bfs" else 0
        if top.phase == "bfs":
            return (n - top.i) + n * self._rows_after(top) + scan + 1
        if top.phase == "scan":
            return n * n - top.scan + 1
        return 1

    def jump(self, s, k):
        """State ``k`` black steps below ``s`` (pointer arithmetic, no stepping)."""
        n = self.n
        if s.phase == "bfs":
            left = n - s.i
            if k < left:
                self.ops.writes += 1
                return replace(s, i=s.i + k)
            k -= left
            rows = self._rows_after(s)
            if k < n * rows:
                r, i = divmod(k, n)
                qrows = len(s.Q) - (s.qf if s.at_root else s.qf + 1)
                self.ops.writes += 2
                if r < qrows:
                    return replace(s, at_root=False, qf=(s.qf if s.at_root else s.qf + 1) + r, i=i)
                roots = [q for q in range(s.rho + 1, n) if not s.L[q]]
                self.ops.reads += 1
                return replace(s, rho=roots[r - qrows], at_root=True, qf=len(s.Q), i=i)
            k -= n * rows
            end = replace(s, at_root=False, qf=len(s.Q), i=0,
                          rho=max([s.rho] + [q for q in range(s.rho + 1, n) if not s.L[q]]))
            if self.mode == "bfs":
                return replace(end, phase="done")
            s = replace(end, phase="scan", scan=0)
        if s.phase == "scan":
            if s.scan + k < n * n:
                self.ops.writes += 1
                return replace(s, scan=s.scan + k)
            return replace(s, phase="done", scan=0)
        return s


def _set(t, k, v):
    return t[:k] + (v,) + t[k + 1:]


# -- maximal matching ----------------------------------------------------------------

@dataclass(frozen=True)
class MatchState:
    p: int          # position i * n + j
    M: tuple
    EM: tuple
    done: bool = False


class MatchingTree(LazyTree):
    """Greedy maximal matching: rows ``i``, columns ``j``; red iff the edge joins two
    unmatched vertices.  Pairs with ``j < i`` are known from row ``j``."""

    name = "matching"

    def root(self):
        return MatchState(0, (0,) * self.n, ())

    def query(self, s):
        return None if s.done else s.p

    def useful(self, s):
        i, j = divmod(s.p, self.n)
        self.ops.reads += 2
        return i < j and not s.M[i] and not s.M[j]

    def advance(self, s):
        self.ops.writes += 1
        if s.p + 1 < self.n * self.n:
            return replace(s, p=s.p + 1)
        return replace(s, p=0, done=True)

    def take(self, s):
        i, j = divmod(s.p, self.n)
        self.ops.writes += 3
        t = replace(s, M=_set(_set(s.M, i, 1), j, 1), EM=s.EM + ((i, j),))
        return self.advance(t)

    def parent(self, s):
        if s.done:
            p = replace(s, p=self.n * self.n - 1, done=False)
        elif s.p == 0:
            return None
        else:
            self.ops.writes += 1
            p = replace(s, p=s.p - 1)
        self.ops.reads += 1
        if p.EM and p.EM[-1] == divmod(p.p, self.n):
            i, j = p.EM[-1]
            self.ops.writes += 3
            return replace(p, M=_set(_set(p.M, i, 0), j, 0), EM=p.EM[:-1])
        return p

    def output(self, s):
        return tuple((i + 1, j + 1) for i, j in s.EM)

    def path_top(self, s):
        if not s.EM:
            return self.root()
        self.ops.reads += 1
        i, j = s.EM[-1]
        return self.advance(replace(s, p=i * self.n + j, done=False))

    def path_length(self, top):
        return 1 if top.done else self.n * self.n - top.p + 1

    def jump(self, s, k):
        self.ops.writes += 1
        if s.p + k < self.n * self.n:
            return replace(s, p=s.p + k)
        return replace(s, p=0, done=True)


# -- frontends -----------------------------------------------------------------------

PROBLEMS = ("first-marked", "bfs", "bipartite", "cycle", "matching")


@dataclass
class Frontend:
    """A problem instance family: decision tree, input encoding, decoding, oracle."""

    problem: str
    n: int
    tree: dtree.DecisionTree
    decode: object            # leaf label -> answer
    lazy: LazyTree | None = None
    materialized: Materialized | None = None
    domain: list = field(default_factory=list)   # (instance, x) pairs

    def input_of(self, inst):
        return tuple(inst) if self.problem == "first-marked" else inst.to_input()

    def reference(self, inst):
        return classical_reference(self.problem, inst)

    def domain_inputs(self):
        return [x for _, x in self.domain]


def first_marked_tree(n):
    """Path-shaped tree guessing 0 at every step; labels are ``f(x)``."""
    return dtree.first_marked_tree(n)


def bfs_tree(n):
    return BfsTree(n, "bfs")


def bipartiteness(n):
    return BfsTree(n, "bipartite")


def cycle_detect(n):
    return BfsTree(n, "cycle")


def maximal_matching_tree(n):
    return MatchingTree(n)


def frontend(problem, n, graphs=None):
    """Build the frontend for ``problem`` on ``n`` vertices (or ``n`` bits).

    ``graphs`` restricts the domain used for witness sizes; by default every
    simple graph on ``n`` vertices (every ``x`` for first-marked).
    """
    if problem == "first-marked":
        t = first_marked_tree(n)
        dom = [(x, x) for x in itertools.product((0, 1), repeat=n)]
        return Frontend(problem, n, t, lambda lab: lab, domain=dom)
    makers = {"bfs": bfs_tree, "bipartite": bipartiteness, "cycle": cycle_detect,
              "matching": maximal_matching_tree}
    if problem not in makers:
        raise ValueError(f"unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}")
    lazy = makers[problem](n)
    mat = lazy.materialize()
    gs = list(all_graphs(n)) if graphs is None else list(graphs)
    dom = [(g, g.to_input()) for g in gs]
    return Frontend(problem, n, mat.tree, mat.decode, lazy, mat, dom)
