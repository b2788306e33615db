"""Modularity scoring and greedy agglomerative community detection.

The detector starts from singleton communities and repeatedly merges the
edge-connected pair with the largest modularity gain, stopping as soon as no
merge yields a strictly positive gain. Bookkeeping follows the standard
agglomerative scheme: pair weight fractions e_ab and degree fractions a_b,
with gain 2 * (e_ab - a_a * a_b) per candidate pair.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .graph import WeightedGraph

__all__ = [
    "Partition",
    "MergeStep",
    "MergeTrace",
    "ModularityUndefinedError",
    "modularity",
    "greedy_agglomerate",
]


class ModularityUndefinedError(ValueError):
    """Raised when modularity is requested for a graph without edges."""


@dataclass
class Partition:
    """Disjoint communities covering all nodes of a graph.

    ``community_of[v]`` is the community label of node v; ``members[b]`` lists
    community b's nodes ascending. Labels are canonical: communities are
    numbered 0..B-1 by their smallest member. ``modularity`` caches the score
    of this partition on the graph it was built from (None for an edgeless
    graph, where the score is undefined).
    """

    community_of: dict[int, int]
    members: list[list[int]]
    modularity: float | None = None

    @property
    def n_communities(self) -> int:
        return len(self.members)

    @classmethod
    def from_communities(
        cls, groups: list[list[int]], score: float | None = None
    ) -> "Partition":
        ordered = sorted((sorted(g) for g in groups), key=lambda g: g[0])
        if any(not g for g in ordered):
            raise ValueError("communities must be non-empty")
        community_of: dict[int, int] = {}
        for b, group in enumerate(ordered):
            for v in group:
                if v in community_of:
                    raise ValueError(f"node {v} appears in two communities")
                community_of[v] = b
        return cls(community_of, ordered, score)

    @classmethod
    def singletons(cls, n_nodes: int, score: float | None = None) -> "Partition":
        return cls({v: v for v in range(n_nodes)}, [[v] for v in range(n_nodes)], score)

    def save(self, path: str) -> None:
        """Write one 'node_id community_id' line per node."""
        with open(path, "w", encoding="utf-8") as fh:
            for v in sorted(self.community_of):
                fh.write(f"{v} {self.community_of[v]}\n")


@dataclass(frozen=True)
class MergeStep:
    a: int
    b: int
    delta_q: float
    q_after: float


@dataclass
class MergeTrace:
    steps: list[MergeStep]

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "a", "b", "delta_q", "q"])
            for k, s in enumerate(self.steps, start=1):
                writer.writerow([k, s.a, s.b, repr(s.delta_q), repr(s.q_after)])


def modularity(graph: WeightedGraph, partition: Partition) -> float:
    """Modularity of a partition: within-community weight vs. random expectation.

    Summed over ordered node pairs (v, w) in the same community, including
    v == w, of (C_vw - k_v k_w / 2m) / 2m. Requires a graph with positive
    total edge weight.
    """
    if graph.total_weight <= 0:
        raise ModularityUndefinedError("modularity undefined for edgeless graph")
    if set(partition.community_of) != set(range(graph.n_nodes)):
        raise ValueError("partition does not cover exactly the graph's nodes")
    two_m = 2.0 * graph.total_weight
    labels = partition.community_of
    internal = [0.0] * partition.n_communities
    for (u, v), w in graph.edges.items():
        if labels[u] == labels[v]:
            internal[labels[u]] += w
    degrees = graph.degrees
    q = 0.0
    for b, group in enumerate(partition.members):
        k_total = float(sum(degrees[v] for v in group))
        q += 2.0 * internal[b] / two_m - (k_total / two_m) ** 2
    return q


def greedy_agglomerate(graph: WeightedGraph) -> tuple[Partition, MergeTrace]:
    """Agglomerate singletons by best-gain merges until no gain is positive.

    Only pairs joined by at least one edge are candidates (disconnected pairs
    always have negative gain). Ties on the gain pick the lexicographically
    smallest (min community id, max community id); the merged community keeps
    the smaller id. An edgeless graph yields the singleton partition and an
    empty trace.
    """
    n = graph.n_nodes
    if n == 0:
        raise ValueError("graph must have at least one node")
    if graph.total_weight <= 0:
        return Partition.singletons(n), MergeTrace([])

    two_m = 2.0 * graph.total_weight
    degree_frac = {v: float(graph.degrees[v]) / two_m for v in range(n)}
    pair_frac: dict[tuple[int, int], float] = {
        (u, v): w / two_m for (u, v), w in graph.edges.items()
    }
    neighbors: dict[int, set[int]] = {v: set() for v in range(n)}
    for u, v in pair_frac:
        neighbors[u].add(v)
        neighbors[v].add(u)
    members: dict[int, list[int]] = {v: [v] for v in range(n)}
    q = -sum(a * a for a in degree_frac.values())
    steps: list[MergeStep] = []

    while True:
        best_pair = None
        best_gain = 0.0
        for pair, e_ab in pair_frac.items():
            gain = 2.0 * (e_ab - degree_frac[pair[0]] * degree_frac[pair[1]])
            if best_pair is None or gain > best_gain or (
                gain == best_gain and pair < best_pair
            ):
                best_pair = pair
                best_gain = gain
        if best_pair is None or best_gain <= 0.0:
            break

        a, b = best_pair  # a < b; b merges into a
        q += best_gain
        steps.append(MergeStep(a, b, best_gain, q))
        members[a].extend(members.pop(b))
        degree_frac[a] += degree_frac.pop(b)
        del pair_frac[(a, b)]
        neighbors[a].discard(b)
        neighbors[b].discard(a)
        for w in neighbors.pop(b):
            old = pair_frac.pop((b, w) if b < w else (w, b))
            key = (a, w) if a < w else (w, a)
            pair_frac[key] = pair_frac.get(key, 0.0) + old
            neighbors[w].discard(b)
            neighbors[w].add(a)
            neighbors[a].add(w)

    partition = Partition.from_communities(list(members.values()), q)
    return partition, MergeTrace(steps)
