"""Weighted co-occurrence graphs over partition units.

Two builders produce the same kind of graph: one counts common suppliers
between pairs of demand locations, the other counts shared constraints between
pairs of variables in a general sparse problem. Edge weights are co-occurrence
counts; there are never self-loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .instance import GeneralProblem, TransportInstance

__all__ = ["WeightedGraph", "build_demand_graph", "build_cooccurrence_graph"]


@dataclass
class WeightedGraph:
    """Undirected weighted graph on nodes 0..n-1 with positive edge weights.

    Edges are keyed ``(u, v)`` with ``u < v``; symmetry and the absence of
    self-loops hold by construction. Degree sums and the total edge weight are
    cached because modularity arithmetic uses them constantly.
    """

    n_nodes: int
    edges: dict[tuple[int, int], float]
    _degrees: np.ndarray | None = field(default=None, repr=False, compare=False)
    _adjacency: list[list[tuple[int, float]]] | None = field(
        default=None, repr=False, compare=False
    )

    @classmethod
    def from_edges(
        cls, n_nodes: int, edges: Iterable[tuple[int, int, float]]
    ) -> "WeightedGraph":
        table: dict[tuple[int, int], float] = {}
        for u, v, w in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError(f"edge ({u}, {v}) outside node range")
            if w <= 0:
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (u, v) if u < v else (v, u)
            table[key] = table.get(key, 0.0) + float(w)
        return cls(n_nodes, table)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def weight(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        key = (u, v) if u < v else (v, u)
        return self.edges.get(key, 0.0)

    @property
    def degrees(self) -> np.ndarray:
        """Weighted degree k_v per node (sum of incident edge weights)."""
        if self._degrees is None:
            k = np.zeros(self.n_nodes)
            for (u, v), w in self.edges.items():
                k[u] += w
                k[v] += w
            self._degrees = k
        return self._degrees

    @property
    def total_weight(self) -> float:
        """m: half the sum of the weighted adjacency matrix."""
        return float(sum(self.edges.values()))

    def neighbors(self, v: int) -> list[tuple[int, float]]:
        if self._adjacency is None:
            adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n_nodes)]
            for (u, w), wt in sorted(self.edges.items()):
                adj[u].append((w, wt))
                adj[w].append((u, wt))
            self._adjacency = adj
        return self._adjacency[v]

    def edge_list(self) -> list[tuple[int, int, float]]:
        """Edges as (u, v, weight) tuples, ascending (u, v)."""
        return [(u, v, w) for (u, v), w in sorted(self.edges.items())]

    def save_edges(self, path: str) -> None:
        """Write one 'u v weight' line per edge, nodes 0-indexed."""
        with open(path, "w", encoding="utf-8") as fh:
            for u, v, w in self.edge_list():
                fh.write(f"{u} {v} {w:.17g}\n")


def _count_pairs(n_nodes: int, groups: Iterable[np.ndarray]) -> dict[tuple[int, int], float]:
    """Count, for every unordered node pair, the number of groups holding both."""
    keys = []
    for ids in groups:
        if len(ids) < 2:
            continue
        iu, iv = np.triu_indices(len(ids), k=1)
        keys.append(ids[iu].astype(np.int64) * n_nodes + ids[iv].astype(np.int64))
    if not keys:
        return {}
    uniq, counts = np.unique(np.concatenate(keys), return_counts=True)
    return {
        (int(k // n_nodes), int(k % n_nodes)): float(c)
        for k, c in zip(uniq, counts)
    }


def build_demand_graph(inst: TransportInstance) -> WeightedGraph:
    """Graph over demand locations, edges weighted by shared real suppliers.

    Two demands are joined when at least one non-dummy supplier can serve both;
    the weight is the number of such suppliers. Demand ids must be 0..n-1.
    """
    n = inst.n_demand
    if sorted(d.id for d in inst.demands) != list(range(n)):
        raise ValueError("demand ids must be contiguous 0..n-1")
    dummy = inst.dummy_id
    groups = (
        np.array(sorted(ids), dtype=np.int64)
        for j, ids in sorted(inst.served_by().items())
        if j != dummy and len(ids) >= 2
    )
    return WeightedGraph(n, _count_pairs(n, groups))


def build_cooccurrence_graph(prob: GeneralProblem) -> WeightedGraph:
    """Graph over variables, edges weighted by shared-constraint counts.

    Equivalent to forming the 0/1 incidence of variables in constraints and
    taking the Gram matrix with its diagonal zeroed: entry (u, v) counts the
    constraints in which both variables appear with a nonzero coefficient.
    """
    prob.validate()
    groups = (
        np.unique(np.array([i for i, a in zip(c.indices, c.coefficients) if a != 0.0], dtype=np.int64))
        for c in prob.constraints
    )
    return WeightedGraph(prob.n_vars, _count_pairs(prob.n_vars, groups))
