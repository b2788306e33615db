"""LP solving for access-restricted transportation problems.

One network-simplex kernel serves every solve in the package: the full
problem (the reference optimum), block sub-problems with only their interior
capacity constraints, and the single-demand relaxation (which also has a
closed form used as the fast path). The kernel works on an arc list
(demand, supplier, cost), converts demand covers to equalities — valid because
all effective costs are nonnegative — and balances capacity constraints
through a zero-cost slack demand node, so no big-M phase is ever needed: the
dummy supplier provides a feasible spanning tree directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .decomposition import Decomposition
from .instance import TransportInstance

__all__ = [
    "PrimalSolution",
    "LpReport",
    "LpFailure",
    "solve_full",
    "solve_singleton",
    "solve_singleton_lp",
    "solve_block",
    "dual_value",
]

FEASIBILITY_TOL = 1e-7  # absolute, on data scaled to unit demand magnitude
OPTIMALITY_TOL = 1e-9  # reduced-cost threshold
_STALL_LIMIT = 50  # degenerate pivots before switching to Bland's rule


class LpFailure(RuntimeError):
    """Numerical failure inside the simplex kernel (pivot cap exceeded, etc.)."""


@dataclass
class PrimalSolution:
    """Sparse matching values keyed by (demand id, supplier id) access pairs."""

    flows: dict[tuple[int, int], float]
    objective: float

    def save_csv(self, path: str) -> None:
        import csv

        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["demand_id", "supplier_id", "flow"])
            for (i, j), x in sorted(self.flows.items()):
                writer.writerow([i, j, repr(x)])


@dataclass
class LpReport:
    status: str  # 'optimal' or 'failure'
    objective: float | None
    solution: PrimalSolution | None
    iterations: int


@dataclass
class ArcProblem:
    """Prepared arc-form LP over a subset of demands and suppliers.

    min sum(cost * x) subject to: each kept demand exactly met (demands with
    zero amount are dropped up front), capacitated suppliers at or under
    capacity, x >= 0. ``hub`` is the local index of an uncapacitated supplier
    reachable from every demand (the dummy), which anchors the initial basis.
    """

    m: np.ndarray
    cap: np.ndarray
    arc_i: np.ndarray
    arc_j: np.ndarray
    cost: np.ndarray
    lam_slot: np.ndarray  # multiplier slot per arc, -1 when undualized
    hub: int
    pairs: list[tuple[int, int]]  # global (demand id, supplier id) per arc

    @property
    def n_arcs(self) -> int:
        return len(self.cost)

    def effective_cost(self, lam: np.ndarray | None) -> np.ndarray:
        if lam is None or len(lam) == 0:
            return self.cost
        out = self.cost.copy()
        mask = self.lam_slot >= 0
        out[mask] += lam[self.lam_slot[mask]]
        return out

    @property
    def separable(self) -> bool:
        """True when no capacity constraint couples the demands."""
        return bool(np.all(np.isinf(self.cap)))


def build_arc_problem(
    inst: TransportInstance,
    demand_ids: Sequence[int],
    capacitated: set[int],
    lambda_index: Mapping[int, int] | None = None,
) -> ArcProblem:
    """Assemble the arc arrays for a demand subset, arcs ascending by (i, j)."""
    lambda_index = lambda_index or {}
    kept = [i for i in sorted(demand_ids) if inst.demand_by_id(i).demand > 0]
    supply_ids = sorted({j for i in kept for j in inst.access[i]})
    if not kept:
        return ArcProblem(
            m=np.zeros(0),
            cap=np.zeros(0),
            arc_i=np.zeros(0, dtype=np.intp),
            arc_j=np.zeros(0, dtype=np.intp),
            cost=np.zeros(0),
            lam_slot=np.full(0, -1, dtype=np.intp),
            hub=-1,
            pairs=[],
        )
    local_j = {j: k for k, j in enumerate(supply_ids)}
    dummy = inst.dummy_id
    if dummy not in local_j:
        raise ValueError("every demand must reach the dummy supplier")

    arc_i, arc_j, cost, slots, pairs = [], [], [], [], []
    for li, i in enumerate(kept):
        for j in inst.access[i]:
            arc_i.append(li)
            arc_j.append(local_j[j])
            cost.append(inst.costs[(i, j)])
            slots.append(lambda_index.get(j, -1))
            pairs.append((i, j))
    cap = np.array(
        [
            inst.supply_by_id(j).capacity if j in capacitated else math.inf
            for j in supply_ids
        ]
    )
    return ArcProblem(
        m=np.array([float(inst.demand_by_id(i).demand) for i in kept]),
        cap=cap,
        arc_i=np.array(arc_i, dtype=np.intp),
        arc_j=np.array(arc_j, dtype=np.intp),
        cost=np.array(cost),
        lam_slot=np.array(slots, dtype=np.intp),
        hub=local_j[dummy],
        pairs=pairs,
    )


def _argmin_per_demand(prob: ArcProblem, eff: np.ndarray) -> np.ndarray:
    """Closed-form solve when demands are uncoupled: cheapest arc per demand.

    Arcs are sorted by (demand, supplier), so the first minimum within each
    demand's slice picks the lowest supplier id on ties.
    """
    flows = np.zeros(prob.n_arcs)
    starts = np.searchsorted(prob.arc_i, np.arange(len(prob.m)))
    ends = np.append(starts[1:], prob.n_arcs)
    for li in range(len(prob.m)):
        s, e = starts[li], ends[li]
        if s == e:
            raise LpFailure(f"demand row {li} has no arcs")
        flows[s + int(np.argmin(eff[s:e]))] = prob.m[li]
    return flows


def solve_arc_problem(
    prob: ArcProblem,
    lam: np.ndarray | None = None,
    basis: list[int] | None = None,
    max_pivots: int | None = None,
) -> tuple[np.ndarray, float, int, list[int] | None]:
    """Solve a prepared arc problem; returns (flows, objective, pivots, basis).

    The objective is priced at the effective (multiplier-adjusted) costs. When
    the problem has no capacity coupling the closed form is used and the basis
    is None; otherwise the network simplex runs, warm-started from ``basis``
    when one is supplied (the basis is independent of costs, so reuse across
    multiplier updates is safe).
    """
    if prob.n_arcs == 0:
        return np.zeros(0), 0.0, 0, None
    eff = prob.effective_cost(lam)
    if np.any(eff < 0):
        raise ValueError("effective costs must be nonnegative")
    if prob.separable:
        flows = _argmin_per_demand(prob, eff)
        nz = flows.nonzero()[0]
        return flows, math.fsum(eff[a] * flows[a] for a in nz), 0, None
    flows, obj, pivots, new_basis = _network_simplex(prob, eff, basis, max_pivots)
    return flows, obj, pivots, new_basis


def _network_simplex(
    prob: ArcProblem,
    eff: np.ndarray,
    basis: list[int] | None,
    max_pivots: int | None,
) -> tuple[np.ndarray, float, int, list[int]]:
    nd = len(prob.m)
    ns = len(prob.cap)
    n_user = prob.n_arcs
    total = float(prob.m.sum())

    # Balance with a slack demand node; capping capacities at the total demand
    # never binds and keeps everything finite.
    cap_eff = np.minimum(prob.cap, total)
    phantom = nd
    n_nodes = nd + 1 + ns
    root = nd + 1 + prob.hub

    arc_i = np.concatenate([prob.arc_i, np.full(ns, phantom, dtype=np.intp)])
    arc_j = np.concatenate([prob.arc_j, np.arange(ns, dtype=np.intp)])
    cost = np.concatenate([eff, np.zeros(ns)])
    node_i = arc_i
    node_j = arc_j + nd + 1
    n_arcs = n_user + ns
    balance = np.concatenate([prob.m, [float(cap_eff.sum()) - total], cap_eff])

    if max_pivots is None:
        max_pivots = max(5000, 50 * n_nodes + 3 * n_arcs)

    # Basis tree state, all maintained incrementally per pivot: adjacency as
    # node -> {neighbor: arc}, parent/parent_arc/depth rooted at the hub, and
    # node potentials satisfying cost = pot[demand] + pot[supply] on tree arcs.
    adj: list[dict[int, int]] = [dict() for _ in range(n_nodes)]
    parent = [-1] * n_nodes
    parent_arc = [-1] * n_nodes
    depth = [0] * n_nodes
    pot = [0.0] * n_nodes

    def link(a: int) -> None:
        u, v = int(node_i[a]), int(node_j[a])
        adj[u][v] = a
        adj[v][u] = a

    def unlink(a: int) -> None:
        u, v = int(node_i[a]), int(node_j[a])
        del adj[u][v]
        del adj[v][u]

    def rebuild_from_root() -> list[int]:
        """Full BFS setting parent/depth/potentials; returns preorder."""
        parent[root] = root
        parent_arc[root] = -1
        depth[root] = 0
        pot[root] = 0.0
        order = [root]
        seen = [False] * n_nodes
        seen[root] = True
        head = 0
        while head < len(order):
            u = order[head]
            head += 1
            for v, a in adj[u].items():
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    parent_arc[v] = a
                    depth[v] = depth[u] + 1
                    pot[v] = cost[a] - pot[u]
                    order.append(v)
        if len(order) != n_nodes:
            raise LpFailure("basis does not span the node set")
        return order

    def tree_flows(order: list[int]) -> np.ndarray:
        bal = balance.copy()
        flow = np.zeros(n_arcs)
        for node in reversed(order[1:]):
            f = bal[node]
            flow[parent_arc[node]] = f
            bal[parent[node]] -= f
        return flow

    if basis is None:
        hub_arc = {}
        for a in range(n_user):
            if prob.arc_j[a] == prob.hub and prob.arc_i[a] not in hub_arc:
                hub_arc[int(prob.arc_i[a])] = a
        if len(hub_arc) != nd:
            raise LpFailure("hub supplier does not reach every demand")
        basis = [hub_arc[i] for i in range(nd)] + [n_user + j for j in range(ns)]

    warm = len(basis) == n_nodes - 1
    if not warm:
        return _network_simplex(prob, eff, None, max_pivots)
    try:
        for a in basis:
            link(a)
        order = rebuild_from_root()
        flow = tree_flows(order)
        if flow.min() < -1e-9:
            raise LpFailure("infeasible flows")
    except LpFailure:
        # Stale warm basis (wrong shape or right-hand side); restart cold.
        return _network_simplex(prob, eff, None, max_pivots)

    in_basis = np.zeros(n_arcs, dtype=bool)
    in_basis[basis] = True
    pot_arr = np.array(pot)
    pivots = 0
    stall = 0
    bland = False
    while True:
        rc = cost - pot_arr[node_i] - pot_arr[node_j]
        rc[in_basis] = 0.0
        if bland:
            candidates = rc < -OPTIMALITY_TOL
            if not candidates.any():
                break
            enter = int(np.argmax(candidates))
        else:
            enter = int(np.argmin(rc))
            if rc[enter] >= -OPTIMALITY_TOL:
                break
        if pivots >= max_pivots:
            raise LpFailure(f"pivot limit {max_pivots} exceeded")

        # Walk both endpoints to their common ancestor. Arc signs alternate
        # outward from each endpoint starting at -theta; the path length is
        # odd (the node set is bipartite), so the two labelings agree.
        u0, v0 = int(node_i[enter]), int(node_j[enter])
        u, v = u0, v0
        minus: list[int] = []
        plus: list[int] = []
        u_leg: list[bool] = []  # parallel to minus+plus order, True if on u's leg
        sign_u = sign_v = True
        while u != v:
            if depth[u] >= depth[v]:
                (minus if sign_u else plus).append(parent_arc[u])
                if sign_u:
                    u_leg.append(True)
                sign_u = not sign_u
                u = parent[u]
            else:
                (minus if sign_v else plus).append(parent_arc[v])
                if sign_v:
                    u_leg.append(False)
                sign_v = not sign_v
                v = parent[v]
        best = min(range(len(minus)), key=lambda k: (flow[minus[k]], minus[k]))
        leave = minus[best]
        theta = flow[leave]
        flow[enter] = theta
        for a in minus:
            flow[a] -= theta
        for a in plus:
            flow[a] += theta
        flow[leave] = 0.0

        # The leaving arc detaches a subtree; the entering endpoint on the
        # same leg lives inside it. Re-hang the subtree from that endpoint and
        # refresh its parents, depths and potentials by one BFS (internal tree
        # arcs stay consistent because potentials shift by a per-side constant).
        unlink(leave)
        link(enter)
        in_basis[leave] = False
        in_basis[enter] = True
        if u_leg[best]:
            inside, outside = u0, v0
        else:
            inside, outside = v0, u0
        parent[inside] = outside
        parent_arc[inside] = enter
        depth[inside] = depth[outside] + 1
        pot_arr[inside] = cost[enter] - pot_arr[outside]
        queue = [inside]
        head = 0
        while head < len(queue):
            x = queue[head]
            head += 1
            for y, a in adj[x].items():
                if y != parent[x] or parent_arc[x] != a:
                    parent[y] = x
                    parent_arc[y] = a
                    depth[y] = depth[x] + 1
                    pot_arr[y] = cost[a] - pot_arr[x]
                    queue.append(y)

        pivots += 1
        if theta > 0:
            stall = 0
            bland = False
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True

    flows = flow[:n_user].copy()
    nz = flow.nonzero()[0]
    obj = math.fsum(cost[a] * flow[a] for a in nz if a < n_user)
    return flows, obj, pivots, sorted(np.nonzero(in_basis)[0].tolist())


def _flows_to_dict(prob: ArcProblem, flows: np.ndarray) -> dict[tuple[int, int], float]:
    return {prob.pairs[a]: float(flows[a]) for a in flows.nonzero()[0]}


def _check_feasible(inst: TransportInstance, prob: ArcProblem, flows: np.ndarray) -> bool:
    scale = max(1.0, float(prob.m.max())) if len(prob.m) else 1.0
    tol = FEASIBILITY_TOL * scale
    met = np.bincount(prob.arc_i, weights=flows, minlength=len(prob.m))
    if np.any(met < prob.m - tol):
        return False
    used = np.bincount(prob.arc_j, weights=flows, minlength=len(prob.cap))
    return not np.any(used > prob.cap + tol)


def solve_full(inst: TransportInstance) -> LpReport:
    """Reference optimum of the complete problem, all real capacities enforced.

    Always feasible thanks to the dummy supplier; a numerical breakdown is
    reported as status 'failure' rather than raised.
    """
    capacitated = {s.id for s in inst.supplies if not s.is_dummy}
    prob = build_arc_problem(inst, inst.demand_ids, capacitated)
    try:
        flows, obj, pivots, _ = solve_arc_problem(prob)
    except LpFailure:
        return LpReport("failure", None, None, 0)
    if not _check_feasible(inst, prob, flows):
        return LpReport("failure", None, None, pivots)
    return LpReport("optimal", obj, PrimalSolution(_flows_to_dict(prob, flows), obj), pivots)


def solve_singleton(
    demand_id: int,
    inst: TransportInstance,
    multipliers: Mapping[int, float] | None = None,
) -> tuple[dict[tuple[int, int], float], float]:
    """Closed-form single-demand relaxation under multiplier-adjusted costs.

    The whole demand goes to the supplier minimizing cost plus multiplier
    (ties to the lowest supplier id), which is optimal because effective costs
    are nonnegative and only the cover constraint remains.
    """
    acc = inst.access.get(demand_id)
    if not acc:
        raise ValueError(f"demand {demand_id} has an empty access set")
    multipliers = multipliers or {}
    if any(v < 0 for v in multipliers.values()):
        raise ValueError("multipliers must be nonnegative")
    best_j = min(acc, key=lambda j: (inst.costs[(demand_id, j)] + multipliers.get(j, 0.0), j))
    amount = float(inst.demand_by_id(demand_id).demand)
    if amount == 0.0:
        return {}, 0.0
    eff = inst.costs[(demand_id, best_j)] + multipliers.get(best_j, 0.0)
    return {(demand_id, best_j): amount}, amount * eff


def solve_singleton_lp(
    demand_id: int,
    inst: TransportInstance,
    multipliers: Mapping[int, float] | None = None,
) -> tuple[dict[tuple[int, int], float], float]:
    """Single-demand relaxation solved by the general simplex kernel.

    Exists as the slow twin of :func:`solve_singleton`, so the closed form can
    be checked against the generic LP route.
    """
    multipliers = dict(multipliers or {})
    index = {j: k for k, j in enumerate(sorted(multipliers))}
    lam = np.array([multipliers[j] for j in sorted(multipliers)])
    prob = build_arc_problem(inst, [demand_id], capacitated=set(), lambda_index=index)
    flows, obj, _, _ = _network_simplex(prob, prob.effective_cost(lam), None, None) if prob.n_arcs else (np.zeros(0), 0.0, 0, None)
    return _flows_to_dict(prob, flows), obj


def solve_block(
    block: int,
    inst: TransportInstance,
    dec: Decomposition,
    lam: np.ndarray | None = None,
) -> tuple[dict[tuple[int, int], float], float]:
    """Optimal sub-problem solution for one block under multipliers ``lam``.

    The objective prices boundary-supplier arcs at cost plus multiplier; only
    the block's interior capacities constrain the LP. ``lam`` aligns with
    ``dec.dualized`` (zeros when omitted).
    """
    if lam is None:
        lam = np.zeros(len(dec.dualized))
    if len(lam) != len(dec.dualized):
        raise ValueError("multiplier vector length does not match dualized count")
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    prob = build_arc_problem(
        inst, dec.blocks[block], set(dec.interior[block]), dec.lambda_index
    )
    flows, obj, _, _ = solve_arc_problem(prob, lam)
    return _flows_to_dict(prob, flows), obj


def dual_value(
    inst: TransportInstance,
    dec: Decomposition,
    lam: np.ndarray,
    block_objectives: Sequence[float],
) -> float:
    """Dual objective: sub-problem total minus the relaxed capacity constant."""
    constant = math.fsum(
        float(lam[k]) * inst.supply_by_id(j).capacity
        for k, j in enumerate(dec.dualized)
    )
    return math.fsum(block_objectives) - constant
