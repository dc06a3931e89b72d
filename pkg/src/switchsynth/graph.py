"""Admissible-transition graphs, walks, and switching signals.

A switching signal and a walk on the transition graph are the same object
read two ways: ``sigma(t)`` is the vertex at position ``t`` and each time
step traverses one edge. Dwelling on a mode for two consecutive steps
therefore needs a self-loop.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

__all__ = [
    "CircuitEnumeration",
    "IncidenceMatrix",
    "SwitchingSignal",
    "TransitionGraph",
    "Walk",
    "WalkStats",
    "build_graph",
    "enumerate_circuits",
    "incidence_matrix",
    "signal_to_walk",
    "walk_stats",
    "walk_to_signal",
]

Edge = tuple


@dataclass(frozen=True)
class TransitionGraph:
    vertices: tuple
    edges: tuple
    _index: dict = field(init=False, repr=False, compare=False)
    _out: dict = field(init=False, repr=False, compare=False)
    _edge_set: frozenset = field(init=False, repr=False, compare=False)
    edge_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})
        out = defaultdict(list)
        for e in self.edges:
            out[e[0]].append(e)
        object.__setattr__(self, "_out", dict(out))
        object.__setattr__(self, "_edge_set", frozenset(self.edges))
        object.__setattr__(self, "edge_index", {e: i for i, e in enumerate(self.edges)})

    def __contains__(self, edge) -> bool:
        return edge in self._edge_set

    def vertex_index(self, v) -> int:
        return self._index[v]

    def out_edges(self, v) -> list:
        return list(self._out.get(v, ()))

    @property
    def self_loops(self) -> tuple:
        return tuple(e for e in self.edges if e[0] == e[1])

    def has_edge(self, k, l) -> bool:
        return (k, l) in self._edge_set


def build_graph(vertices: Iterable[Hashable], edges: Iterable[Sequence]) -> TransitionGraph:
    """Validate and freeze a transition graph; edge order is kept as given."""
    vertices = tuple(vertices)
    if not vertices:
        raise ValueError("graph needs at least one vertex")
    if len(set(vertices)) != len(vertices):
        dup = [v for v, n in Counter(vertices).items() if n > 1]
        raise ValueError(f"duplicate vertex {dup[0]!r}")
    known = set(vertices)
    seen = set()
    out = []
    for e in edges:
        if len(e) != 2:
            raise ValueError(f"edge {e!r} is not a pair")
        e = (e[0], e[1])
        for endpoint in e:
            if endpoint not in known:
                raise ValueError(f"edge {e!r} references undeclared vertex {endpoint!r}")
        if e in seen:
            raise ValueError(f"duplicate edge {e!r}")
        seen.add(e)
        out.append(e)
    return TransitionGraph(vertices, tuple(out))


@dataclass(frozen=True)
class IncidenceMatrix:
    matrix: np.ndarray
    rows: tuple
    columns: tuple


def auxiliary_label(v) -> str:
    return f"{v}'"


def incidence_matrix(g: TransitionGraph) -> IncidenceMatrix:
    """Node-arc incidence matrix with one auxiliary row per self-loop.

    Column ``(i, j)`` has ``+1`` in row ``i`` and ``-1`` in row ``j``; a
    self-loop ``(j, j)`` is read as an arc from ``j`` to its auxiliary
    vertex ``j'``. Auxiliary rows follow the vertex rows, in vertex order.
    """
    looped = [v for v in g.vertices if (v, v) in g._edge_set]
    rows = tuple(g.vertices) + tuple(auxiliary_label(v) for v in looped)
    aux_row = {v: len(g.vertices) + i for i, v in enumerate(looped)}
    M = np.zeros((len(rows), len(g.edges)), dtype=int)
    for col, (i, j) in enumerate(g.edges):
        M[g.vertex_index(i), col] = 1
        if i == j:
            M[aux_row[j], col] = -1
        else:
            M[g.vertex_index(j), col] = -1
    return IncidenceMatrix(M, rows, g.edges)


@dataclass(frozen=True)
class Walk:
    """Vertex sequence ``v0, v1, ..., vL``; edges are consecutive pairs."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if not self.vertices:
            raise ValueError("a walk has at least one vertex")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def edges(self) -> list:
        v = self.vertices
        return [(v[i], v[i + 1]) for i in range(len(v) - 1)]

    @property
    def closed(self) -> bool:
        return self.length >= 1 and self.vertices[0] == self.vertices[-1]

    @property
    def is_trail(self) -> bool:
        edges = self.edges
        return len(set(edges)) == len(edges)

    @property
    def is_circuit(self) -> bool:
        return self.closed and self.is_trail

    def check(self, g: TransitionGraph) -> "Walk":
        for t, (k, l) in enumerate(self.edges):
            if not g.has_edge(k, l):
                raise ValueError(f"step {t}: transition {k!r} -> {l!r} is not admissible")
        if self.length == 0 and self.vertices[0] not in g._index:
            raise ValueError(f"unknown vertex {self.vertices[0]!r}")
        return self

    def repeat(self, k: int) -> "Walk":
        """Concatenate a closed walk with itself ``k`` times."""
        if k < 1:
            raise ValueError("k must be positive")
        if not self.closed:
            raise ValueError("only closed walks can be repeated")
        body = self.vertices[:-1]
        return Walk(body * k + self.vertices[-1:])

    def rotate(self, start: int) -> "Walk":
        if not self.closed:
            raise ValueError("only closed walks can be rotated")
        body = self.vertices[:-1]
        start %= len(body)
        body = body[start:] + body[:start]
        return Walk(body + body[:1])


@dataclass(frozen=True)
class SwitchingSignal:
    """A finite prefix, or a finite prelude followed by a repeated period.

    ``SwitchingSignal(prelude=(…))`` is an explicit prefix and is undefined
    beyond its length. With ``period`` set the signal is infinite.
    """

    prelude: tuple = ()
    period: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "prelude", tuple(self.prelude))
        if self.period is not None:
            object.__setattr__(self, "period", tuple(self.period))
            if not self.period:
                raise ValueError("period must be nonempty")
        elif not self.prelude:
            raise ValueError("signal is empty")

    @classmethod
    def from_circuit(cls, circuit: Walk, prelude=()) -> "SwitchingSignal":
        if not circuit.closed:
            raise ValueError("circuit must be a closed walk")
        return cls(prelude=tuple(prelude), period=circuit.vertices[:-1])

    @classmethod
    def constant(cls, mode) -> "SwitchingSignal":
        return cls(period=(mode,))

    @property
    def is_periodic(self) -> bool:
        return self.period is not None

    def __len__(self):
        if self.is_periodic:
            raise TypeError("periodic signal has no finite length")
        return len(self.prelude)

    def __call__(self, t: int):
        if t < 0:
            raise IndexError("negative time")
        if t < len(self.prelude):
            return self.prelude[t]
        if self.period is None:
            raise IndexError(f"signal prefix ends at t={len(self.prelude) - 1}")
        return self.period[(t - len(self.prelude)) % len(self.period)]

    def prefix(self, T: int) -> tuple:
        """``(sigma(0), ..., sigma(T))``."""
        return tuple(self(t) for t in range(T + 1))

    def period_walk(self) -> Walk:
        if self.period is None:
            raise ValueError("signal is not periodic")
        return Walk(self.period + self.period[:1])

    def check(self, g: TransitionGraph) -> "SwitchingSignal":
        seq = self.prelude + (self.period + self.period[:1] if self.period else ())
        for v in seq:
            if v not in g._index:
                raise ValueError(f"mode {v!r} is not a vertex of the graph")
        signal_to_walk(seq, g)
        return self


def _as_sequence(sigma, T=None) -> tuple:
    if isinstance(sigma, SwitchingSignal):
        if T is None:
            if sigma.is_periodic:
                raise ValueError("a horizon is required for a periodic signal")
            return sigma.prelude
        return sigma.prefix(T)
    seq = tuple(sigma)
    return seq if T is None else seq[: T + 1]


def signal_to_walk(sigma, g: TransitionGraph | None = None, T: int | None = None) -> Walk:
    """Read ``sigma(0..T)`` as a walk of length ``T``.

    With a graph, every step is checked for admissibility and the first
    offending time is reported.
    """
    seq = _as_sequence(sigma, T)
    if not seq:
        raise ValueError("empty signal")
    if g is not None:
        for t in range(len(seq) - 1):
            if not g.has_edge(seq[t], seq[t + 1]):
                raise ValueError(f"t={t}: transition {seq[t]!r} -> {seq[t + 1]!r} is not admissible")
        if len(seq) == 1 and seq[0] not in g._index:
            raise ValueError(f"t=0: unknown mode {seq[0]!r}")
    return Walk(seq)


def walk_to_signal(w: Walk) -> SwitchingSignal:
    return SwitchingSignal(prelude=w.vertices)


@dataclass(frozen=True)
class WalkStats:
    rho: Counter
    kappa: Counter
    closed: bool

    @property
    def boundary_discrepancy(self) -> bool:
        """Open walks undercount the final vertex by one."""
        return not self.closed


def walk_stats(w: Walk) -> WalkStats:
    """Edge traversal counts and per-vertex activation counts.

    ``kappa[j]`` counts traversals of edges leaving ``j``, which equals the
    number of steps spent in ``j`` exactly when the walk is closed.
    """
    rho = Counter(w.edges)
    kappa = Counter()
    for (k, _), n in rho.items():
        kappa[k] += n
    return WalkStats(rho, kappa, w.closed)


@dataclass
class CircuitEnumeration:
    circuits: list
    truncated: bool = False


def _canonical(body: tuple, order: dict) -> tuple:
    n = len(body)
    keys = [tuple(order[v] for v in body[i:] + body[:i]) for i in range(n)]
    best = min(range(n), key=lambda i: keys[i])
    return body[best:] + body[:best]


def enumerate_circuits(
    g: TransitionGraph,
    max_len: int,
    max_circuits: int | None = None,
    edges: Iterable[Edge] | None = None,
) -> CircuitEnumeration:
    """All circuits (closed trails) of length at most ``max_len``.

    Each circuit appears once, rotated to its lexicographically smallest
    vertex sequence (by vertex order). Depth-first search over unused edges
    with an edge bitmask; searches from each start vertex visit only vertices
    not earlier in the order, so every circuit is found from its minimum.
    ``edges`` restricts the search to a subset of the graph's edges.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    order = {v: i for i, v in enumerate(g.vertices)}
    allowed = g.edges if edges is None else tuple(e for e in g.edges if e in set(edges))
    out_adj = defaultdict(list)
    for bit, e in enumerate(allowed):
        out_adj[e[0]].append((bit, e[1]))

    found = set()
    result = []
    truncated = False

    for s in g.vertices:
        floor = order[s]
        # iterative DFS: (vertex, used mask, path)
        stack = [(s, 0, (s,))]
        while stack:
            v, used, path = stack.pop()
            for bit, w in reversed(out_adj[v]):
                if used >> bit & 1 or order[w] < floor:
                    continue
                new_path = path + (w,)
                if w == s:
                    key = _canonical(new_path[:-1], order)
                    if key not in found:
                        if max_circuits is not None and len(result) >= max_circuits:
                            truncated = True
                            break
                        found.add(key)
                        result.append(Walk(key + key[:1]))
                if len(new_path) - 1 < max_len:
                    stack.append((w, used | 1 << bit, new_path))
            if truncated:
                break
        if truncated:
            break

    result.sort(key=lambda c: (c.length, [order[v] for v in c.vertices]))
    return CircuitEnumeration(result, truncated)
