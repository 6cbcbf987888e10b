"""Integral matching extraction from a fractional hypergraph optimum.

The elimination loop repeatedly pulls out a hyperedge whose closed
neighborhood carries at most two units of fractional mass (such an edge
always exists at a vertex solution), then a local-ratio sweep over the
elimination order returns a matching worth at least half the fractional
optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations as _pairs
from typing import Mapping, Sequence

from .graphs import TripartiteGraph

_MASS_BOUND = 2.0
_MASS_TOL = 1e-9
_WEIGHT_TOL = 1e-12


class NotBasicError(RuntimeError):
    """No low-mass hyperedge exists and the fallback is disabled."""


@dataclass(frozen=True)
class Matching:
    """Pairwise node-disjoint hyperedge selection."""

    selected: tuple[int, ...]      # hyperedge indices into the graph
    weight: float                  # sum of original weights, joules
    fallbacks: int = 0             # eliminations that needed the mass fallback


def is_matching(graph: TripartiteGraph, edge_ids: Sequence[int]) -> bool:
    seen = set()
    for idx in edge_ids:
        for node in graph.edge_nodes(graph.hyperedges[idx]):
            if node in seen:
                return False
            seen.add(node)
    return True


class _NeighborhoodMass:
    """Incremental union mass over each edge's closed neighborhood.

    Inclusion-exclusion over an edge's three nodes: edges sharing two nodes
    would otherwise be double counted, so per-pair and per-triple masses are
    maintained alongside the per-node sums.
    """

    def __init__(self, graph: TripartiteGraph, fractions: dict[int, float]):
        self.graph = graph
        self.m1: dict[tuple, float] = {}
        self.m2: dict[tuple, float] = {}
        self.m3: dict[tuple, float] = {}
        for idx, v in fractions.items():
            self._bump(idx, v)

    def _keys(self, idx: int):
        nodes = self.graph.edge_nodes(self.graph.hyperedges[idx])
        return nodes, tuple(_pairs(nodes, 2)), nodes

    def _bump(self, idx: int, delta: float) -> None:
        nodes, pairs, triple = self._keys(idx)
        for n in nodes:
            self.m1[n] = self.m1.get(n, 0.0) + delta
        for p in pairs:
            self.m2[p] = self.m2.get(p, 0.0) + delta
        self.m3[triple] = self.m3.get(triple, 0.0) + delta

    def remove(self, idx: int, value: float) -> None:
        self._bump(idx, -value)

    def mass(self, idx: int) -> float:
        nodes, pairs, triple = self._keys(idx)
        total = sum(self.m1.get(n, 0.0) for n in nodes)
        total -= sum(self.m2.get(p, 0.0) for p in pairs)
        total += self.m3.get(triple, 0.0)
        return total


def kdma(graph: TripartiteGraph, f, *, allow_fallback: bool = True,
         zero_tol: float = 1e-9) -> Matching:
    """Round a basic fractional matching optimum to an integral matching.

    f is the solution of the fractional matching LP over graph.hyperedges.
    Edges with no fraction are dropped; the rest are eliminated one by one,
    always picking the lowest-index edge whose closed neighborhood mass is
    at most 2, and the local-ratio sweep over that order yields the
    matching.  If numerical drift leaves no qualifying edge, the edge of
    minimal mass is taken instead and counted in ``fallbacks`` (disabled by
    allow_fallback=False, which raises NotBasicError).
    """
    values = getattr(f, "values", f)
    fractions = {idx: float(values[idx])
                 for idx in range(len(graph.hyperedges))
                 if values[idx] > zero_tol}
    mass = _NeighborhoodMass(graph, fractions)
    remaining = sorted(fractions)
    queue: list[int] = []
    fallbacks = 0
    while remaining:
        pick = None
        for idx in remaining:
            if mass.mass(idx) <= _MASS_BOUND + _MASS_TOL:
                pick = idx
                break
        if pick is None:
            if not allow_fallback:
                raise NotBasicError(
                    "no hyperedge with neighborhood mass <= 2; "
                    "solution is not a vertex")
            pick = min(remaining, key=lambda i: (mass.mass(i), i))
            fallbacks += 1
        queue.append(pick)
        mass.remove(pick, fractions[pick])
        remaining.remove(pick)

    weights = {idx: graph.hyperedges[idx].weight for idx in queue}
    neighbors = _queue_neighbors(graph, queue)
    selected = local_ratio(queue, weights, neighbors)
    total = sum(graph.hyperedges[idx].weight for idx in selected)
    return Matching(tuple(sorted(selected)), total, fallbacks)


def _queue_neighbors(graph: TripartiteGraph, queue: Sequence[int],
                     ) -> dict[int, list[int]]:
    incident: dict[tuple, list[int]] = {}
    queued = set(queue)
    for idx in queue:
        for node in graph.edge_nodes(graph.hyperedges[idx]):
            incident.setdefault(node, []).append(idx)
    out: dict[int, list[int]] = {}
    for idx in queue:
        nbrs = set()
        for node in graph.edge_nodes(graph.hyperedges[idx]):
            nbrs.update(incident[node])
        out[idx] = [e for e in nbrs if e in queued]
    return out


def local_ratio(queue: Sequence[int], weights: Mapping[int, float],
                neighbors: Mapping[int, Sequence[int]]) -> list[int]:
    """Local-ratio selection over an ordered queue of hyperedges.

    Iterative form of the recursion: walk left to right, and whenever an
    edge still has positive residual weight, charge that weight against its
    whole neighborhood (itself included) and remember the edge.  Unwinding
    right to left keeps every remembered edge that stays node-disjoint from
    later keeps.  Residual weights only ever decrease, which is why a single
    forward sweep suffices.
    """
    residual = {idx: float(weights[idx]) for idx in queue}
    charged: list[int] = []
    for idx in queue:
        w = residual[idx]
        if w <= _WEIGHT_TOL:
            continue
        for nbr in neighbors[idx]:
            residual[nbr] -= w
        charged.append(idx)

    selected: list[int] = []
    blocked: set[int] = set()
    for idx in reversed(charged):
        if idx in blocked:
            continue
        selected.append(idx)
        blocked.update(neighbors[idx])
    return selected
