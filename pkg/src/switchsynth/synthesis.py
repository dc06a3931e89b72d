"""Periodic stabilizing switching signals from a circulation LP.

The search space is the set of 0/1 edge vectors ``f`` that form closed
trails: ``A f = 0`` over the self-loop-augmented incidence matrix, with the
weighted transition/activation ratio linearized as a single inequality. A
basic solution of the LP relaxation is found with the package's simplex,
made integral if needed, split into circuits and turned into a signal by
repeating one circuit forever.
"""
from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from .certificates import GainTable, StabilityClass
from .graph import (
    IncidenceMatrix,
    SwitchingSignal,
    TransitionGraph,
    Walk,
    enumerate_circuits,
    incidence_matrix,
)
from .simplex import ITERATION_LIMIT, OPTIMAL, simplex
from .stability import AsymptoticVerdict, RatioReport, asymptotic_check, switching_ratio

__all__ = [
    "DEFAULT_EPSILON",
    "DecompositionError",
    "EdgeFlow",
    "FeasibilityLP",
    "FeasibilityOutcome",
    "InfeasibleError",
    "SynthesisConsistencyError",
    "SynthesisResult",
    "UndecidedError",
    "build_lp",
    "decompose_flow",
    "extract_circuit",
    "hierholzer",
    "solve_feasibility",
    "synthesize",
    "trivial_case_check",
]

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
EQ_TOL = 1e-8
INT_TOL = 1e-6

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDECIDED = "undecided"

AS = StabilityClass.ASYMPTOTICALLY_STABLE
U = StabilityClass.UNSTABLE


class InfeasibleError(RuntimeError):
    pass


class UndecidedError(RuntimeError):
    pass


class SynthesisConsistencyError(AssertionError):
    """The assembled signal failed its independent re-check."""


class DecompositionError(RuntimeError):
    def __init__(self, message, ratios):
        super().__init__(message)
        self.ratios = ratios


@dataclass(frozen=True)
class EdgeFlow:
    edges: tuple
    f: np.ndarray = field(repr=False)

    @classmethod
    def indicator(cls, edges, support) -> "EdgeFlow":
        support = set(support)
        return cls(tuple(edges), np.array([1.0 if e in support else 0.0 for e in edges]))

    def is_integral(self, tol: float = INT_TOL) -> bool:
        return bool(np.all(np.minimum(np.abs(self.f), np.abs(self.f - 1.0)) <= tol))

    @property
    def support(self) -> list:
        return [e for e, v in zip(self.edges, self.f) if v > 0.5]

    def as_dict(self) -> dict:
        return {e: float(v) for e, v in zip(self.edges, self.f)}


def trivial_case_check(g: TransitionGraph, classes: Mapping) -> Hashable | None:
    """First stable mode, in vertex order, that may dwell on itself."""
    for v in g.vertices:
        if classes.get(v) is AS and g.has_edge(v, v):
            return v
    return None


@dataclass(frozen=True)
class FeasibilityLP:
    """``A f = 0``, ``ratio_row @ f <= 0``, ``sum f >= 1``, ``0 <= f <= 1``.

    ``ratio_row[e] = ln mu_e + |ln lam_k| [k unstable] - (1 - eps) |ln lam_k| [k stable]``
    for ``e = (k, l)``: every traversal of an edge leaving ``k`` is one step
    spent in ``k`` on a closed walk. ``activation_row @ f >= activation_floor``
    excludes circulations that never visit a stable mode; any circuit through a
    stable mode meets it, so no admissible circuit is cut off.
    """

    graph: TransitionGraph
    incidence: IncidenceMatrix
    ratio_row: np.ndarray
    activation_row: np.ndarray
    activation_floor: float
    epsilon: float
    objective: np.ndarray | None
    gains: GainTable = field(repr=False)
    classes: Mapping = field(repr=False)

    @property
    def edges(self) -> tuple:
        return self.graph.edges

    @property
    def n_vars(self) -> int:
        return len(self.graph.edges)

    @property
    def n_equality_rows(self) -> int:
        return self.incidence.matrix.shape[0]

    def standard_form(self):
        """Equality form with slack columns for the three inequality rows."""
        n = self.n_vars
        M = self.incidence.matrix.astype(float)
        m = M.shape[0]
        A = np.zeros((m + 3, n + 3))
        A[:m, :n] = M
        A[m, :n] = self.ratio_row
        A[m, n] = 1.0
        A[m + 1, :n] = 1.0
        A[m + 1, n + 1] = -1.0
        A[m + 2, :n] = self.activation_row
        A[m + 2, n + 2] = -1.0
        b = np.zeros(m + 3)
        b[m + 1] = 1.0
        b[m + 2] = self.activation_floor
        lo = np.zeros(n + 3)
        hi = np.concatenate([np.ones(n), np.full(3, np.inf)])
        c = None if self.objective is None else np.concatenate([self.objective, np.zeros(3)])
        return c, A, b, lo, hi

    def check(self, f, tol: float = EQ_TOL) -> bool:
        f = np.asarray(f, dtype=float)
        scale = max(1.0, float(np.abs(self.ratio_row).max(initial=0.0)))
        return bool(
            np.all(f >= -tol)
            and np.all(f <= 1 + tol)
            and np.all(np.abs(self.incidence.matrix @ f) <= tol)
            and self.ratio_row @ f <= tol * scale
            and f.sum() >= 1 - tol
            and self.activation_row @ f >= self.activation_floor - tol * scale
        )

    def ratio_value(self, f) -> float:
        """Unslacked ratio ``N(f) / D(f)`` of a flow."""
        f = np.asarray(f, dtype=float)
        den = float(self.activation_row @ f)
        num = float((self.ratio_row + (1 - self.epsilon) * self.activation_row) @ f)
        return num / den if den > 0 else np.inf


def build_lp(
    g: TransitionGraph,
    gains: GainTable,
    classes: Mapping,
    epsilon: float = DEFAULT_EPSILON,
    objective: str = "max-support",
) -> FeasibilityLP:
    """Assemble the circuit-feasibility LP.

    ``objective="max-support"`` asks phase 2 for the basic solution with the
    largest total flow; ``"feasibility"`` stops at the first phase-1 vertex.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    stable = [v for v in g.vertices if classes.get(v) is AS]
    if not stable:
        raise InfeasibleError("no asymptotically stable mode: the ratio denominator is identically zero")
    ratio = np.zeros(len(g.edges))
    act = np.zeros(len(g.edges))
    for i, (k, l) in enumerate(g.edges):
        if (k, l) not in gains.log_mu:
            raise KeyError(f"no gain for transition {(k, l)!r}")
        weight = abs(gains.log_lambda[k])
        ratio[i] = gains.log_mu[(k, l)]
        if classes[k] is U:
            ratio[i] += weight
        elif classes[k] is AS:
            ratio[i] -= (1 - epsilon) * weight
            act[i] = weight
    floor = min(abs(gains.log_lambda[v]) for v in stable)
    if objective == "max-support":
        obj = -np.ones(len(g.edges))
    elif objective == "feasibility":
        obj = None
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return FeasibilityLP(g, incidence_matrix(g), ratio, act, floor, epsilon, obj, gains, dict(classes))


@dataclass
class FeasibilityOutcome:
    status: str
    flow: EdgeFlow | None = None
    method: str | None = None
    relaxation: np.ndarray | None = None
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def decompose_flow(edges, f, tol: float = 1e-9) -> list[tuple[float, list]]:
    """Split a nonnegative circulation into weighted simple cycles.

    Greedy: start at the first edge still carrying flow, follow the first
    loaded out-edge until a vertex repeats, peel off that cycle at its
    bottleneck weight. Deterministic in edge order.
    """
    r = np.array(f, dtype=float)
    r[r < tol] = 0.0
    out = defaultdict(list)
    for i, (k, _) in enumerate(edges):
        out[k].append(i)
    cycles = []
    for _ in range(len(edges) + 1):
        live = np.flatnonzero(r > tol)
        if live.size == 0:
            break
        first = live[0]
        path_vertices = [edges[first][0]]
        path_edges = []
        pos = {edges[first][0]: 0}
        v = edges[first][0]
        cycle = None
        while cycle is None:
            nxt = next((i for i in out[v] if r[i] > tol), None)
            if nxt is None:
                break
            path_edges.append(nxt)
            v = edges[nxt][1]
            if v in pos:
                cycle = path_edges[pos[v]:]
            else:
                pos[v] = len(path_vertices)
                path_vertices.append(v)
        if cycle is None:
            # unbalanced residue from rounding noise
            r[first] = 0.0
            continue
        w = float(r[cycle].min())
        r[cycle] -= w
        r[np.abs(r) <= tol] = 0.0
        cycles.append((w, [edges[i] for i in cycle]))
    return cycles


def solve_feasibility(
    lp: FeasibilityLP,
    *,
    max_iter: int = 10_000,
    max_oracle_edges: int = 20,
) -> FeasibilityOutcome:
    """Find an integral LP-feasible edge set, or decide there is none.

    A basic solution is returned as is when integral. Otherwise, in order:
    its 0.5-rounding, the simple cycles of the rounding and of the fractional
    flow, and finally (small graphs only) exhaustive circuit search. Every
    candidate is checked against all constraints before it is returned.
    """
    c, A, b, lo, hi = lp.standard_form()
    res = simplex(c, A, b, lo, hi, max_iter=max_iter)
    if res.status == ITERATION_LIMIT:
        return FeasibilityOutcome(UNDECIDED, iterations=res.iterations)
    if res.status != OPTIMAL:
        return FeasibilityOutcome(INFEASIBLE, iterations=res.iterations)

    n = lp.n_vars
    x = res.x[:n]
    edges = lp.edges
    outcome = FeasibilityOutcome(FEASIBLE, relaxation=x, iterations=res.iterations)

    def accept(vec, method):
        outcome.flow = EdgeFlow(edges, np.asarray(vec, dtype=float))
        outcome.method = method
        return outcome

    def usable(vec) -> bool:
        # a feasible union of circuits is only useful if one piece passes alone
        if not lp.check(vec):
            return False
        parts = _components([e for e, v in zip(edges, vec) if v > 0.5])
        if len(parts) == 1:
            return True
        return any(
            switching_ratio(hierholzer(p), lp.gains, lp.classes, lp.epsilon).satisfied for p in parts
        )

    snapped = np.round(x)
    if np.all(np.abs(x - snapped) <= INT_TOL) and usable(snapped):
        return accept(snapped, "lp-vertex")

    rounded = (x >= 0.5).astype(float)
    if rounded.any() and usable(rounded):
        return accept(rounded, "rounded")

    candidates = []
    if rounded.any() and np.all(lp.incidence.matrix @ rounded == 0):
        candidates += decompose_flow(edges, rounded)
    candidates += decompose_flow(edges, x)
    for _, cycle in candidates:
        vec = EdgeFlow.indicator(edges, cycle).f
        if lp.check(vec):
            return accept(vec, "decomposed")

    if len(edges) <= max_oracle_edges:
        log.info("LP vertex not repairable; falling back to exhaustive circuit search")
        loop_free = [e for e in edges if e[0] != e[1]]
        found = enumerate_circuits(lp.graph, max(len(loop_free), 1), edges=loop_free)
        for circuit in found.circuits:
            vec = EdgeFlow.indicator(edges, circuit.edges).f
            if lp.check(vec):
                return accept(vec, "oracle")
        return FeasibilityOutcome(INFEASIBLE, relaxation=x, iterations=res.iterations)
    return FeasibilityOutcome(UNDECIDED, relaxation=x, iterations=res.iterations)


def hierholzer(edges) -> Walk:
    """Eulerian circuit of a balanced, connected directed edge list."""
    edges = list(edges)
    if not edges:
        raise ValueError("no edges")
    adj = defaultdict(deque)
    for k, l in edges:
        adj[k].append(l)
    stack = [edges[0][0]]
    tour = []
    while stack:
        v = stack[-1]
        if adj[v]:
            stack.append(adj[v].popleft())
        else:
            tour.append(stack.pop())
    tour.reverse()
    if len(tour) != len(edges) + 1:
        raise ValueError("edge set is not connected")
    return Walk(tour)


def _components(edges) -> list[list]:
    parent = {}

    def find(v):
        while parent.setdefault(v, v) != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for k, l in edges:
        parent[find(k)] = find(l)
    groups: dict = {}
    for e in edges:
        groups.setdefault(find(e[0]), []).append(e)
    return list(groups.values())


def extract_circuit(
    flow: EdgeFlow,
    g: TransitionGraph,
    gains: GainTable | None = None,
    classes=None,
    margin: float = 0.0,
) -> Walk:
    """Closed trail through every edge of an integral balanced flow.

    A support that falls apart into several weakly connected pieces yields
    one circuit per piece; the first whose ratio is below ``1 - margin`` is
    returned, which needs ``gains``.
    """
    if not flow.is_integral():
        raise ValueError("flow is not integral")
    support = flow.support
    if not support:
        raise ValueError("flow is zero")
    balance = defaultdict(int)
    for k, l in support:
        if k == l:
            continue
        balance[k] += 1
        balance[l] -= 1
    bad = [v for v, b in balance.items() if b]
    if bad:
        raise ValueError(f"flow is not balanced at vertex {bad[0]!r}")
    for e in support:
        if not g.has_edge(*e):
            raise ValueError(f"flow uses unknown edge {e!r}")

    parts = _components(support)
    circuits = [hierholzer(p) for p in parts]
    if len(circuits) == 1:
        return circuits[0]
    if gains is None:
        raise DecompositionError("support splits into several circuits; gains needed to choose", [])
    reports = [switching_ratio(c, gains, classes, margin) for c in circuits]
    for c, rep in zip(circuits, reports):
        if rep.satisfied:
            return c
    raise DecompositionError(
        "support decomposed; no single component satisfies the ratio test",
        [r.ratio for r in reports],
    )


@dataclass
class SynthesisResult:
    circuit: Walk
    signal: SwitchingSignal
    ratio: RatioReport
    verdict: AsymptoticVerdict
    flow: EdgeFlow | None = None
    trivial_case: Hashable | None = None
    method: str | None = None
    components: int = 1
    lp: FeasibilityLP | None = None

    @property
    def multi_component(self) -> bool:
        """Support had several components and one was picked."""
        return self.components > 1


def synthesize(
    system,
    epsilon: float | None = None,
    *,
    prefer_trivial: bool = True,
    max_oracle_edges: int = 20,
    max_iter: int = 10_000,
    objective: str = "max-support",
) -> SynthesisResult:
    """Certificates -> gains -> LP -> circuit -> periodic signal.

    Raises ``InfeasibleError`` or ``UndecidedError`` when no signal is
    produced. The result is re-verified from the circuit alone before it is
    returned.
    """
    if epsilon is None:
        epsilon = system.epsilon if getattr(system, "epsilon", None) is not None else DEFAULT_EPSILON
    g = system.graph
    gains = system.gains
    classes = system.classes

    trivial = trivial_case_check(g, classes)
    if trivial is not None and prefer_trivial:
        return _trivial_result(trivial, gains, classes)

    lp = build_lp(g, gains, classes, epsilon, objective)
    outcome = solve_feasibility(lp, max_iter=max_iter, max_oracle_edges=max_oracle_edges)
    if outcome.status == UNDECIDED:
        raise UndecidedError("feasibility could not be decided within the iteration/oracle budget")
    if not outcome.feasible:
        if trivial is not None:
            return _trivial_result(trivial, gains, classes)
        raise InfeasibleError("no circuit satisfies the ratio condition")

    n_parts = len(_components(outcome.flow.support))
    circuit = extract_circuit(outcome.flow, g, gains, classes, margin=epsilon)
    signal = SwitchingSignal.from_circuit(circuit)
    report = switching_ratio(circuit, gains, classes)
    verdict = asymptotic_check(signal, gains, classes)
    if not (report.ratio < 1.0 and verdict.stabilizing):
        raise SynthesisConsistencyError(
            f"circuit {circuit.vertices} has ratio {report.ratio:.6g}; LP and re-check disagree"
        )
    return SynthesisResult(
        circuit, signal, report, verdict, outcome.flow, None, outcome.method, n_parts, lp
    )


def _trivial_result(mode, gains, classes) -> SynthesisResult:
    circuit = Walk((mode, mode))
    signal = SwitchingSignal.constant(mode)
    report = switching_ratio(circuit, gains, classes)
    verdict = asymptotic_check(signal, gains, classes)
    if not verdict.stabilizing:
        raise SynthesisConsistencyError(f"constant signal on mode {mode!r} failed its re-check")
    return SynthesisResult(circuit, signal, report, verdict, None, mode, "trivial")
