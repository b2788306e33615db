"""Block dual decompositions: interior/boundary supplier classification.

Given a partition of demand locations into blocks, a supplier whose reachable
demands all sit in one block is *interior* to it — its capacity constraint
stays inside that block's sub-problem. A supplier reachable from several
blocks is *boundary*; its capacity constraint is relaxed into the objective
with one shared multiplier. The baseline decomposition instead makes every
demand its own block and relaxes every real supply constraint.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .community import Partition
from .instance import TransportInstance

__all__ = ["Decomposition", "classify_suppliers", "baseline_decomposition", "dualized_count"]


@dataclass
class Decomposition:
    """Blocks of demand ids plus the supplier classification they induce.

    ``dualized`` lists the boundary suppliers in ascending id order; that order
    is the index order of the multiplier vector for the whole solve. The dummy
    supplier never appears anywhere here: it has no capacity constraint.
    """

    blocks: list[list[int]]  # demand ids per block, ascending
    block_of: dict[int, int]
    interior: list[list[int]]  # per block, ascending supplier ids
    boundary: list[list[int]]  # per block, ascending supplier ids
    dualized: list[int]  # all boundary suppliers, ascending = multiplier order
    lambda_index: dict[int, int] = field(default_factory=dict)
    kind: str = "block"

    def __post_init__(self):
        if not self.lambda_index:
            self.lambda_index = {j: k for k, j in enumerate(self.dualized)}

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def interior_all(self) -> list[int]:
        out = [j for block in self.interior for j in block]
        return sorted(out)

    def save_csv(self, path: str) -> None:
        """One row per classified supplier: id, interior/boundary, block or '-'."""
        rows = []
        for b, js in enumerate(self.interior):
            rows.extend((j, "interior", str(b)) for j in js)
        rows.extend((j, "boundary", "-") for j in self.dualized)
        rows.sort(key=lambda r: r[0])
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["supplier_id", "class", "block_id"])
            writer.writerows(rows)


def classify_suppliers(inst: TransportInstance, partition: Partition) -> Decomposition:
    """Classify every reachable real supplier as interior or boundary.

    The partition must cover exactly the instance's demand ids. Suppliers with
    an empty reachable set are ignored (their constraints are trivially slack).
    """
    demand_ids = set(inst.demand_ids)
    if set(partition.community_of) != demand_ids:
        raise ValueError("partition nodes do not match the instance's demand ids")

    blocks = [sorted(g) for g in partition.members]
    block_of = dict(partition.community_of)
    interior: list[list[int]] = [[] for _ in blocks]
    boundary: list[set[int]] = [set() for _ in blocks]
    dummy = inst.dummy_id
    for j, served in sorted(inst.served_by().items()):
        if j == dummy or not served:
            continue
        touched = {block_of[i] for i in served}
        if len(touched) == 1:
            interior[next(iter(touched))].append(j)
        else:
            for b in touched:
                boundary[b].add(j)
    for js in interior:
        js.sort()
    dualized = sorted(set().union(*boundary)) if boundary else []
    return Decomposition(
        blocks=blocks,
        block_of=block_of,
        interior=interior,
        boundary=[sorted(js) for js in boundary],
        dualized=dualized,
        kind="block",
    )


def baseline_decomposition(inst: TransportInstance, smart: bool = False) -> Decomposition:
    """One block per demand location.

    By default every real supply constraint is relaxed, even for suppliers
    serving a single demand, so each sub-problem is a bare one-demand matching.
    With ``smart=True`` the singleton partition goes through the interior/
    boundary classification instead, keeping single-demand suppliers interior.
    """
    ids = sorted(inst.demand_ids)
    singleton = Partition.from_communities([[i] for i in ids])
    if smart:
        dec = classify_suppliers(inst, singleton)
        dec.kind = "smart-baseline"
        return dec

    dummy = inst.dummy_id
    served = inst.served_by()
    dualized = sorted(j for j, s in served.items() if j != dummy and s)
    dual_set = set(dualized)
    block_of = {i: b for b, i in enumerate(ids)}
    boundary = [sorted(j for j in inst.access[i] if j in dual_set) for i in ids]
    return Decomposition(
        blocks=[[i] for i in ids],
        block_of=block_of,
        interior=[[] for _ in ids],
        boundary=boundary,
        dualized=dualized,
        kind="baseline",
    )


def dualized_count(dec: Decomposition) -> int:
    """Number of relaxed supply constraints, i.e. the multiplier dimension."""
    return len(dec.dualized)
