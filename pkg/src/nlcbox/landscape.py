"""Critical-point hierarchy: descent and ascent searches between saddles
of different Morse index, the connectivity graph, and transition
pathways between minima.

``downward_search`` expands an index-m saddle by perturbing along each
unstable direction with both signs and driving the dynamics toward
index m-1 (plus a plain descent sweep), deduplicating the children.
``upward_search`` climbs from a minimum toward a prescribed target
index.  ``LandscapeGraph`` collects the critical points found this way
as nodes with strictly index-decreasing edges, and
``transition_pathway`` enumerates minimum-saddle-minimum chains between
two minima of the graph, ranked by energy barrier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .classify import (
    ClassifierConfig,
    StateLabel,
    classify_faces,
    symmetrize_field,
)
from .energy import ModelParams
from .errors import (
    MaxStepsExceeded,
    NlcError,
    NoPathFound,
    NotTargetIndex,
)
from .grid import Field
from .linsolve import smallest_eigs
from .saddle import (
    SaddleState,
    SolverConfig,
    hessian_map,
    make_state,
    morse_index,
    newton_polish,
    run_hisd,
)

__all__ = [
    "GraphNode",
    "GraphEdge",
    "LandscapeGraph",
    "ChildRecord",
    "DownwardResult",
    "downward_search",
    "upward_search",
    "PathwayChain",
    "transition_pathway",
    "converge_symmetric",
]

_REL_ENERGY_TOL = 1e-6


def _same_energy(a: float, b: float, rel: float = _REL_ENERGY_TOL) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b), 1.0)


# ----------------------------------------------------------------------
# graph
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GraphNode:
    """One critical point: identity is (index, label, energy)."""

    key: int
    checksum: str
    energy: float
    e_bc: float
    index: int
    label: StateLabel
    params: dict
    field_ref: str | None = None

    @property
    def name(self) -> str:
        return self.label.name


@dataclass(frozen=True)
class GraphEdge:
    """Directed parent -> child connection found by a perturbed descent;
    ``direction`` is the unstable-direction index at the parent and
    ``sign`` the perturbation sign."""

    parent: int
    child: int
    direction: int
    sign: int


class LandscapeGraph:
    """Collector of critical points and their descent connections.

    Nodes are deduplicated by (Morse index, face label, energy within
    1e-6 relative); edges must strictly decrease the Morse index.
    """

    def __init__(self):
        self.nodes: list[GraphNode] = []
        self.edges: list[GraphEdge] = []
        self._fields: dict[int, Field] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def match(self, index: int, label: StateLabel, energy: float) -> GraphNode | None:
        for n in self.nodes:
            if n.index == index and n.label == label and _same_energy(n.energy, energy):
                return n
        return None

    def add_state(
        self,
        state: SaddleState,
        label: StateLabel,
        params: dict,
        field_ref: str | None = None,
        keep_field: bool = True,
    ) -> tuple[GraphNode, bool]:
        """Insert a certified state; returns (node, inserted)."""
        if state.index is None:
            raise ValueError("state must carry a certified Morse index")
        found = self.match(state.index, label, state.energy)
        if found is not None:
            return found, False
        node = GraphNode(
            key=len(self.nodes),
            checksum=state.q.checksum(),
            energy=state.energy,
            e_bc=state.e_bc,
            index=state.index,
            label=label,
            params=dict(params),
            field_ref=field_ref,
        )
        self.nodes.append(node)
        if keep_field:
            self._fields[node.key] = state.q
        return node, True

    def add_edge(self, parent: int, child: int, direction: int, sign: int) -> GraphEdge:
        pn, cn = self.nodes[parent], self.nodes[child]
        if cn.index >= pn.index:
            raise ValueError(
                f"edge must decrease the index: {pn.index} -> {cn.index}"
            )
        edge = GraphEdge(parent, child, direction, sign)
        if edge not in self.edges:
            self.edges.append(edge)
        return edge

    def field(self, key: int) -> Field:
        return self._fields[key]

    def minima(self) -> list[GraphNode]:
        return [n for n in self.nodes if n.index == 0]

    def find(self, label, index: int | None = None) -> list[GraphNode]:
        """Nodes matching a StateLabel or a collapsed name string."""
        want = label.name if isinstance(label, StateLabel) else str(label)
        return [
            n
            for n in self.nodes
            if n.name == want and (index is None or n.index == index)
        ]

    def as_dict(self) -> dict:
        """JSON-ready snapshot: nodes sorted by energy, then edges."""
        order = sorted(self.nodes, key=lambda n: (n.energy, n.key))
        nodes = [
            {
                "key": n.key,
                "checksum": n.checksum,
                "energy": n.energy,
                "e_bc": n.e_bc,
                "index": n.index,
                "label": n.name,
                "tags": {f"{ax},{side}": t for (ax, side), t in n.label.as_dict().items()},
                "params": n.params,
                "field_ref": n.field_ref,
            }
            for n in order
        ]
        edges = [
            {
                "parent": e.parent,
                "child": e.child,
                "direction": e.direction,
                "sign": e.sign,
            }
            for e in self.edges
        ]
        return {"nodes": nodes, "edges": edges}


# ----------------------------------------------------------------------
# downward search
# ----------------------------------------------------------------------


@dataclass
class ChildRecord:
    """A deduplicated child plus every perturbation that reached it."""

    state: SaddleState
    label: StateLabel
    arrivals: list[tuple[int, int]]  # (direction, sign)


@dataclass
class DownwardResult:
    parent: SaddleState
    children: list[ChildRecord]
    failures: list[tuple[int, int, int, str]]  # (direction, sign, k, message)


def _unstable_directions(state: SaddleState, m: int, params: ModelParams,
                         cfg: SolverConfig) -> list[Field]:
    if len(state.directions) == m:
        return list(state.directions)
    ev = smallest_eigs(
        hessian_map(state.q, params), m, tol=cfg.eig_tol, maxit=cfg.eig_maxit
    )
    return [p.vector for p in ev]


def downward_search(
    state: SaddleState,
    params: ModelParams,
    cfg: SolverConfig | None = None,
    classifier: ClassifierConfig | None = None,
    delta: float = 0.2,
) -> DownwardResult:
    """Expand an index-m saddle into its lower-index children.

    For every unstable direction v_i and sign s, the dynamics runs from
    q + s*delta*v_i with target index m-1, and again with target 0 as a
    final sweep when m > 1.  Children are deduplicated by (index, label,
    energy within 1e-6 relative); runs that fail or fall back to the
    parent are recorded in ``failures`` and do not abort the search.
    """
    cfg = cfg or SolverConfig()
    if state.index is None:
        m, _pairs = morse_index(state.q, params)
    else:
        m = state.index
    if m < 1:
        raise ValueError("downward search needs an unstable starting state")
    dirs = _unstable_directions(state, m, params, cfg)

    targets = [m - 1] if m == 1 else [m - 1, 0]
    children: list[ChildRecord] = []
    failures: list[tuple[int, int, int, str]] = []
    for k in targets:
        for i in range(m):
            for sign in (1, -1):
                q0 = state.q + dirs[i] * (sign * delta)
                v0 = [dirs[j] for j in range(m) if j != i][:k] if k else None
                run_cfg = replace(cfg, k=k, certify=True)
                try:
                    child = run_hisd(q0, v0, run_cfg, params)
                except NlcError as err:
                    failures.append((i, sign, k, f"{type(err).__name__}: {err}"))
                    continue
                if child.index is None or child.index >= m:
                    failures.append(
                        (i, sign, k, f"converged to index {child.index}, "
                                     f"not below {m}")
                    )
                    continue
                label = classify_faces(child.q, classifier)
                for rec in children:
                    if (
                        rec.state.index == child.index
                        and rec.label == label
                        and _same_energy(rec.state.energy, child.energy)
                    ):
                        if (i, sign) not in rec.arrivals:
                            rec.arrivals.append((i, sign))
                        break
                else:
                    children.append(ChildRecord(child, label, [(i, sign)]))
    return DownwardResult(parent=state, children=children, failures=failures)


def add_downward(
    graph: LandscapeGraph,
    parent_key: int,
    result: DownwardResult,
    params: dict,
) -> list[GraphNode]:
    """Merge a downward-search result under an existing graph node."""
    out = []
    for rec in result.children:
        node, _new = graph.add_state(rec.state, rec.label, params)
        for direction, sign in rec.arrivals:
            graph.add_edge(parent_key, node.key, direction, sign)
        out.append(node)
    return out


# ----------------------------------------------------------------------
# upward search
# ----------------------------------------------------------------------


def upward_search(
    minimum: SaddleState,
    target_k: int,
    params: ModelParams,
    cfg: SolverConfig | None = None,
    delta: float = 0.2,
    strict: bool = False,
) -> SaddleState:
    """Climb from an index-0 state toward an index ``target_k`` saddle.

    The initial unstable directions are the smallest Hessian eigenpairs
    at the minimum, and the start point is nudged by ``delta`` along the
    softest one.  With ``strict`` a result of the wrong certified index
    raises NotTargetIndex; otherwise it is returned carrying the
    "not_target_index" flag.
    """
    cfg = cfg or SolverConfig()
    if minimum.index not in (None, 0):
        raise ValueError("upward search starts from a minimum (index 0)")
    if target_k == 0:
        return minimum
    ev = smallest_eigs(
        hessian_map(minimum.q, params),
        target_k,
        tol=cfg.eig_tol,
        maxit=cfg.eig_maxit,
    )
    v0 = [p.vector for p in ev]
    q0 = minimum.q + v0[0] * delta
    state = run_hisd(q0, v0, replace(cfg, k=target_k, certify=True), params)
    if strict and state.index != target_k:
        raise NotTargetIndex(
            f"ascent targeting index {target_k} converged to index "
            f"{state.index} (energy {state.energy:.6g})"
        )
    return state


# ----------------------------------------------------------------------
# transition pathways
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PathwayChain:
    """Alternating minimum/saddle node keys from start to goal, with the
    barrier max(saddle energy) - start energy."""

    keys: tuple[int, ...]
    barrier: float

    @property
    def n_saddles(self) -> int:
        return (len(self.keys) - 1) // 2

    @property
    def minima(self) -> tuple[int, ...]:
        return self.keys[0::2]

    @property
    def saddles(self) -> tuple[int, ...]:
        return self.keys[1::2]


def _resolve_minimum(graph: LandscapeGraph, label, what: str) -> GraphNode:
    found = graph.find(label, index=0)
    if not found:
        raise NoPathFound(f"{what} state {label!s} is not a minimum of the graph")
    if len(found) > 1:
        raise NoPathFound(
            f"{what} state {label!s} matches {len(found)} minima; "
            "pass a unique label"
        )
    return found[0]


def transition_pathway(a, b, graph: LandscapeGraph) -> list[PathwayChain]:
    """All simple minimum-saddle-minimum chains from a to b, sorted by
    barrier, then by length.

    ``a`` and ``b`` are StateLabels (or collapsed name strings) of
    index-0 nodes; chains pass through index-1 saddles adjacent to
    consecutive minima via graph edges.
    """
    start = _resolve_minimum(graph, a, "start")
    goal = _resolve_minimum(graph, b, "goal")
    if start.key == goal.key:
        return [PathwayChain(keys=(start.key,), barrier=0.0)]

    # saddle key -> adjacent minima keys
    adjacency: dict[int, set[int]] = {}
    for e in graph.edges:
        pn, cn = graph.nodes[e.parent], graph.nodes[e.child]
        if pn.index == 1 and cn.index == 0:
            adjacency.setdefault(pn.key, set()).add(cn.key)

    # minimum key -> list of (saddle, other minimum)
    hops: dict[int, list[tuple[int, int]]] = {}
    for s, mins in adjacency.items():
        for m1 in mins:
            for m2 in mins:
                if m1 != m2:
                    hops.setdefault(m1, []).append((s, m2))

    chains: list[PathwayChain] = []
    node_e = {n.key: n.energy for n in graph.nodes}

    def dfs(current: int, path: tuple[int, ...], used_minima: frozenset):
        if current == goal.key:
            saddle_keys = path[1::2]
            barrier = max(node_e[s] for s in saddle_keys) - node_e[start.key]
            chains.append(PathwayChain(keys=path, barrier=barrier))
            return
        for s, m2 in sorted(hops.get(current, ())):
            if m2 in used_minima or s in path:
                continue
            dfs(m2, path + (s, m2), used_minima | {m2})

    dfs(start.key, (start.key,), frozenset({start.key}))
    if not chains:
        raise NoPathFound(
            f"no minimum-saddle chain connects {start.name} to {goal.name}"
        )
    chains.sort(key=lambda c: (c.barrier, len(c.keys), c.keys))
    return chains


# ----------------------------------------------------------------------
# symmetric-branch convergence
# ----------------------------------------------------------------------


def converge_symmetric(
    q0: Field,
    params: ModelParams,
    ops,
    cfg: SolverConfig | None = None,
    chunk: int = 200,
    max_rounds: int = 200,
) -> SaddleState:
    """Descend to the minimum of a symmetry class without leaving it.

    Unconstrained descent on an unstable symmetric branch eventually
    amplifies rounding noise along the unstable directions; here each
    bounded descent burst is followed by an exact group-orbit average,
    which projects the iterate back onto the invariant subspace.  A
    Newton polish finishes convergence and the result is certified with
    its full Morse index (counting the symmetry-breaking directions).
    """
    cfg = cfg or SolverConfig()
    sd_cfg = replace(
        cfg,
        k=0,
        switch_tol=float(np.nextafter(cfg.final_tol, np.inf)),
        max_steps=chunk,
        certify=False,
    )
    f = symmetrize_field(q0, ops)
    done = False
    for _ in range(max_rounds):
        try:
            state = run_hisd(f, None, sd_cfg, params)
            done = True
        except MaxStepsExceeded as err:
            state = err.state
        f = symmetrize_field(state.q, ops)
        if done:
            break
    else:
        raise MaxStepsExceeded(
            f"symmetric descent did not reach {cfg.final_tol:g} within "
            f"{max_rounds} rounds of {chunk} steps"
        )
    polish_cfg = replace(cfg, certify=False)
    for _ in range(3):
        state = newton_polish(f, polish_cfg, params)
        f = symmetrize_field(state.q, ops)
        state = make_state(f, params)
        if state.grad_norm < cfg.final_tol:
            break
    idx, _pairs = morse_index(state.q, params, max_k=max(cfg.k + 4, 10))
    state.converged = True
    state.index = idx
    return state
