"""Bipartite and tripartite graph construction from a fractional solution.

The relaxation's marginals are packed bucket-by-bucket into AP (or server)
nodes so that every node except an owner's last carries exactly one unit of
fraction; sorting by allocation level beforehand is what makes any integral
matching of the result respect the owner's true capacity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .discretize import Combination

_ZERO_TOL = 1e-9
_SNAP = 1e-9


@dataclass
class BgEdge:
    units: int       # allocation of the first element that created the edge
    fraction: float


@dataclass
class BipartiteGraph:
    """Task nodes against split resource nodes for one side (APs or servers).

    Edge keys are (task, owner, r) with buckets r = 1..n_nodes[owner];
    element_edges maps each positive marginal (task, owner, level) to the one
    or two edges it created, in creation order.
    """

    n_nodes: dict[int, int] = field(default_factory=dict)
    edges: dict[tuple[int, int, int], BgEdge] = field(default_factory=dict)
    element_edges: dict[tuple[int, int, int], list[tuple[int, int, int]]] = \
        field(default_factory=dict)

    def nodes(self) -> list[tuple[int, int]]:
        return [(owner, r) for owner in sorted(self.n_nodes)
                for r in range(1, self.n_nodes[owner] + 1)]

    def node_fraction(self, owner: int, r: int) -> float:
        return sum(e.fraction for (t, o, rr), e in self.edges.items()
                   if o == owner and rr == r)

    def bucket_max_units(self, owner: int) -> list[int]:
        """Max allocation of any edge per bucket; the capacity witness sums it."""
        out = [0] * self.n_nodes.get(owner, 0)
        for (t, o, r), e in self.edges.items():
            if o == owner:
                out[r - 1] = max(out[r - 1], e.units)
        return out

    def _assign(self, key: tuple[int, int, int], units: int,
                fraction: float) -> None:
        edge = self.edges.get(key)
        if edge is None:
            self.edges[key] = BgEdge(units, fraction)
        else:
            edge.fraction += fraction


def project(solution, combos: Sequence[Combination], zero_tol: float = _ZERO_TOL,
            ) -> tuple[dict[tuple[int, int, int], float],
                       dict[tuple[int, int, int], float]]:
    """Marginal sums of the combination solution.

    Returns (x, y): x[(task, ap, bw_level)] sums the solution mass over
    servers and cpu levels, y[(task, server, cpu_level)] the mirror image.
    """
    values = getattr(solution, "values", solution)
    xt: dict[tuple[int, int, int], float] = {}
    yt: dict[tuple[int, int, int], float] = {}
    for idx, c in enumerate(combos):
        v = float(values[idx])
        if v <= zero_tol:
            continue
        kx = (c.task, c.ap, c.bw_level)
        ky = (c.task, c.server, c.cpu_level)
        xt[kx] = xt.get(kx, 0.0) + v
        yt[ky] = yt.get(ky, 0.0) + v
    return xt, yt


def bg_construct(fractions: Mapping[tuple[int, int, int], float],
                 units: Mapping[tuple[int, int], int]) -> BipartiteGraph:
    """Split each owner into ceil(total fraction) nodes and attach edges.

    fractions maps (task, owner, level) to a marginal in [0, 1]; units maps
    (owner, level) to the allocation in integer units.  Per owner, elements
    are walked in descending level (ties by ascending task), accumulating a
    prefix sum: an element crossing an integer boundary splits into two
    edges.  Integer comparisons snap at 1e-9 so LP rounding dust never mints
    phantom nodes.
    """
    g = BipartiteGraph()
    owners: dict[int, list[tuple[int, int, float]]] = {}
    for (task, owner, level), frac in fractions.items():
        if frac > _ZERO_TOL:
            owners.setdefault(owner, []).append((task, level, frac))

    for owner in sorted(owners):
        elems = owners[owner]
        elems.sort(key=lambda e: (-e[1], e[0]))
        total = sum(e[2] for e in elems)
        n = max(1, math.ceil(total - _SNAP))
        g.n_nodes[owner] = n

        prev = 0.0
        for task, level, frac in elems:
            r = min(int(math.floor(prev + _SNAP)) + 1, n)
            cur = prev + frac
            alloc = units[(owner, level)]
            created = []
            if cur <= r + _SNAP or r == n:
                g._assign((task, owner, r), alloc, frac)
                created.append((task, owner, r))
            else:
                g._assign((task, owner, r), alloc, r - prev)
                created.append((task, owner, r))
                g._assign((task, owner, r + 1), alloc, cur - r)
                created.append((task, owner, r + 1))
            g.element_edges[(task, owner, level)] = created
            prev = cur
    return g


@dataclass(frozen=True)
class Hyperedge:
    """Task/AP-node/server-node triple with its committed allocations."""

    task: int
    ap_node: tuple[int, int]        # (ap, r)
    server_node: tuple[int, int]    # (server, s)
    weight: float                   # joules, from the defining combination
    bw_units: int
    cpu_units: int
    combo_index: int                # provenance into the combination list


@dataclass
class TripartiteGraph:
    num_tasks: int
    ap_nodes: list[tuple[int, int]]
    server_nodes: list[tuple[int, int]]
    hyperedges: list[Hyperedge] = field(default_factory=list)

    def all_nodes(self):
        for i in range(self.num_tasks):
            yield ("t", i)
        for jn in self.ap_nodes:
            yield ("a",) + jn
        for kn in self.server_nodes:
            yield ("s",) + kn

    def edge_nodes(self, e: Hyperedge):
        return (("t", e.task), ("a",) + e.ap_node, ("s",) + e.server_node)

    def incidence(self) -> dict[tuple, list[int]]:
        inc: dict[tuple, list[int]] = {}
        for idx, e in enumerate(self.hyperedges):
            for node in self.edge_nodes(e):
                inc.setdefault(node, []).append(idx)
        return inc


def wtg_construct(solution, combos: Sequence[Combination],
                  bg_x: BipartiteGraph, bg_y: BipartiteGraph,
                  num_tasks: Optional[int] = None,
                  zero_tol: float = _ZERO_TOL) -> TripartiteGraph:
    """Merge the two bipartite graphs into the weighted tripartite graph.

    Positive solution entries are visited in non-increasing energy order
    (ties by lexicographic combination); each crosses its one or two AP
    edges with its one or two server edges, and the first visit to a
    hyperedge fixes its weight and allocations, so every hyperedge carries
    the best energy among the combinations that map onto it.
    """
    values = getattr(solution, "values", solution)
    if num_tasks is None:
        num_tasks = max((c.task for c in combos), default=-1) + 1
    order = [idx for idx in range(len(combos)) if values[idx] > zero_tol]
    order.sort(key=lambda idx: (-combos[idx].saved_energy,
                                tuple(combos[idx][:5])))

    graph = TripartiteGraph(
        num_tasks=num_tasks,
        ap_nodes=bg_x.nodes(),
        server_nodes=bg_y.nodes(),
    )
    seen: set[tuple[int, tuple[int, int], tuple[int, int]]] = set()
    for idx in order:
        c = combos[idx]
        ex_keys = bg_x.element_edges.get((c.task, c.ap, c.bw_level), ())
        ey_keys = bg_y.element_edges.get((c.task, c.server, c.cpu_level), ())
        for ex in ex_keys:
            for ey in ey_keys:
                key = (c.task, (ex[1], ex[2]), (ey[1], ey[2]))
                if key in seen:
                    continue
                seen.add(key)
                graph.hyperedges.append(Hyperedge(
                    task=c.task,
                    ap_node=key[1],
                    server_node=key[2],
                    weight=c.saved_energy,
                    bw_units=bg_x.edges[ex].units,
                    cpu_units=bg_y.edges[ey].units,
                    combo_index=idx,
                ))
    return graph


def graph_to_dict(graph: TripartiteGraph) -> dict:
    """JSON-ready dump for debugging and test fixtures."""
    return {
        "num_tasks": graph.num_tasks,
        "ap_nodes": [list(n) for n in graph.ap_nodes],
        "server_nodes": [list(n) for n in graph.server_nodes],
        "hyperedges": [
            {
                "task": e.task,
                "ap_node": list(e.ap_node),
                "server_node": list(e.server_node),
                "u": e.weight,
                "b": e.bw_units,
                "c": e.cpu_units,
                "combo": e.combo_index,
            }
            for e in graph.hyperedges
        ],
    }


def dump_graph_json(graph: TripartiteGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_dict(graph), fh, indent=2)
