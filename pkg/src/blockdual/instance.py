"""Transportation instances: data model, seeded spatial generator, validation, file I/O.

An instance matches demand locations to supply locations over a sparse access
structure: demand ``i`` may only be served by the suppliers in its access set,
at a per-unit cost equal to the Euclidean distance between the two sites. A
single uncapacitated "dummy" supplier, reachable from every demand at a large
fixed cost, guarantees feasibility of every instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DemandSite",
    "SupplySite",
    "TransportInstance",
    "GeneratorConfig",
    "GeneratorError",
    "ParseError",
    "Constraint",
    "GeneralProblem",
    "largest_remainder",
    "generate_instance",
    "validate_instance",
    "save_instance",
    "load_instance",
]


class GeneratorError(ValueError):
    """Raised for generator configurations that cannot produce an instance."""


class ParseError(ValueError):
    """Raised when an instance file is malformed; names the offending line."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class DemandSite:
    id: int
    x: float
    y: float
    demand: float


@dataclass(frozen=True)
class SupplySite:
    id: int
    x: float
    y: float
    capacity: float  # math.inf for the dummy supplier
    is_dummy: bool = False


@dataclass
class TransportInstance:
    """A capacitated matching problem over a sparse demand/supply access graph.

    ``access[i]`` is the ascending list of supplier ids that may serve demand
    ``i`` (always including the dummy), and ``costs[(i, j)]`` is the per-unit
    cost for every stored access pair. Treat instances as immutable once built;
    the reverse access map is cached on first use.
    """

    demands: list[DemandSite]
    supplies: list[SupplySite]  # dummy supplier carries is_dummy=True
    access: dict[int, list[int]]
    costs: dict[tuple[int, int], float]
    d_max: float
    dummy_cost: float
    _served_by: dict[int, list[int]] | None = field(
        default=None, repr=False, compare=False
    )
    _demand_map: dict[int, DemandSite] | None = field(
        default=None, repr=False, compare=False
    )
    _supply_map: dict[int, SupplySite] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def n_demand(self) -> int:
        return len(self.demands)

    @property
    def n_supply(self) -> int:
        """Number of real (non-dummy) supply locations."""
        return sum(1 for s in self.supplies if not s.is_dummy)

    @property
    def dummy_id(self) -> int:
        for s in self.supplies:
            if s.is_dummy:
                return s.id
        raise ValueError("instance has no dummy supplier")

    @property
    def demand_ids(self) -> list[int]:
        return [d.id for d in self.demands]

    def demand_by_id(self, i: int) -> DemandSite:
        if self._demand_map is None:
            self._demand_map = {d.id: d for d in self.demands}
        return self._demand_map[i]

    def supply_by_id(self, j: int) -> SupplySite:
        if self._supply_map is None:
            self._supply_map = {s.id: s for s in self.supplies}
        return self._supply_map[j]

    def served_by(self) -> dict[int, list[int]]:
        """Reverse access map: supplier id -> ascending demand ids it can serve."""
        if self._served_by is None:
            rev: dict[int, list[int]] = {s.id: [] for s in self.supplies}
            for d in self.demands:
                for j in self.access[d.id]:
                    rev[j].append(d.id)
            for ids in rev.values():
                ids.sort()
            self._served_by = rev
        return self._served_by

    def total_demand(self) -> float:
        return float(sum(d.demand for d in self.demands))

    def total_capacity(self) -> float:
        """Sum of real supplier capacities (the dummy is unbounded)."""
        return float(sum(s.capacity for s in self.supplies if not s.is_dummy))

    def average_access(self) -> float:
        """Average number of real (non-dummy) suppliers reachable per demand."""
        if not self.demands:
            return 0.0
        total = sum(len(self.access[d.id]) - 1 for d in self.demands)
        return total / len(self.demands)

    def n_variables(self) -> int:
        """Number of matching variables, i.e. stored access pairs."""
        return sum(len(self.access[d.id]) for d in self.demands)


@dataclass(frozen=True)
class GeneratorConfig:
    """Configuration for the seeded spatial instance generator.

    The region is a ``region[0]`` x ``region[1]`` rectangle with origin (0, 0),
    split into ``grid[0]`` columns by ``grid[1]`` rows of equal cells. Cell k
    covers column ``k % cols`` and row ``k // cols``. Location counts per cell
    follow ``block_weights`` (uniform when omitted) with largest-remainder
    rounding, so the totals are hit exactly.

    Demand and supply location counts may follow different per-cell weight
    tables (``supply_block_weights`` falls back to ``block_weights``), so the
    two kinds of sites can cluster differently across the region.

    Demands are integers drawn uniformly from ``demand_range`` (inclusive).
    Capacities are either drawn from ``capacity_range`` when given, or shaped
    like the demand draw and then rescaled so that total capacity equals
    ``round(supply_ratio * total demand)`` exactly.
    """

    n_demand: int
    n_supply: int
    d_max: float
    seed: int
    region: tuple[float, float] = (300.0, 300.0)
    grid: tuple[int, int] = (10, 5)
    block_weights: tuple[float, ...] | None = None
    supply_block_weights: tuple[float, ...] | None = None
    demand_range: tuple[int, int] = (2500, 8000)
    supply_ratio: float = 1.2
    capacity_range: tuple[int, int] | None = None
    dummy_cost: float = 1000.0

    @property
    def n_cells(self) -> int:
        return self.grid[0] * self.grid[1]

    def cell_bounds(self, k: int) -> tuple[float, float, float, float]:
        """(x_lo, x_hi, y_lo, y_hi) of grid cell k."""
        cols, rows = self.grid
        cw = self.region[0] / cols
        ch = self.region[1] / rows
        col, row = k % cols, k // cols
        return (col * cw, (col + 1) * cw, row * ch, (row + 1) * ch)

    def weights(self) -> tuple[float, ...]:
        if self.block_weights is not None:
            return self.block_weights
        return (1.0,) * self.n_cells

    def supply_weights(self) -> tuple[float, ...]:
        if self.supply_block_weights is not None:
            return self.supply_block_weights
        return self.weights()

    def validate(self) -> None:
        if self.n_demand <= 0:
            raise GeneratorError("n_demand must be positive")
        if self.n_supply <= 0:
            raise GeneratorError("n_supply must be positive")
        if self.d_max < 0:
            raise GeneratorError("d_max must be nonnegative")
        if self.region[0] <= 0 or self.region[1] <= 0:
            raise GeneratorError("region sides must be positive")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise GeneratorError("grid must have at least one cell")
        for label, w in (("block", self.weights()), ("supply block", self.supply_weights())):
            if len(w) != self.n_cells:
                raise GeneratorError(
                    f"{label} weights has {len(w)} entries for {self.n_cells} cells"
                )
            if any(x < 0 for x in w):
                raise GeneratorError(f"{label} weights must be nonnegative")
            if sum(w) <= 0:
                raise GeneratorError(f"total {label} weight is zero")
        lo, hi = self.demand_range
        if lo < 0 or hi < lo:
            raise GeneratorError("demand_range must satisfy 0 <= lo <= hi")
        if self.capacity_range is not None:
            lo, hi = self.capacity_range
            if lo < 0 or hi < lo:
                raise GeneratorError("capacity_range must satisfy 0 <= lo <= hi")
        if self.supply_ratio <= 0:
            raise GeneratorError("supply_ratio must be positive")
        if self.dummy_cost < 0:
            raise GeneratorError("dummy_cost must be nonnegative")


def largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    """Split ``total`` into integer parts proportional to ``weights``.

    Each part differs from its exact quota by less than 1; leftover units go to
    the largest fractional remainders, ties broken by lower index.
    """
    wsum = float(sum(weights))
    if total == 0:
        return [0] * len(weights)
    if wsum <= 0:
        raise GeneratorError("total weight is zero")
    quotas = [total * w / wsum for w in weights]
    parts = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(parts)
    order = sorted(range(len(weights)), key=lambda k: (-(quotas[k] - parts[k]), k))
    for k in order[:leftover]:
        parts[k] += 1
    return parts


def block_counts(config: GeneratorConfig) -> tuple[list[int], list[int]]:
    """Per-cell demand and supply location counts for a configuration."""
    return (
        largest_remainder(config.n_demand, config.weights()),
        largest_remainder(config.n_supply, config.supply_weights()),
    )


def generate_instance(config: GeneratorConfig) -> TransportInstance:
    """Generate a seeded instance; a pure, deterministic function of ``config``.

    The random stream is numpy's PCG64 seeded with ``config.seed``, consumed in
    a fixed order: demand positions per cell (x then y, cells ascending), then
    supply positions per cell, then demand amounts, then raw capacities. Access
    sets depend on positions and ``d_max`` only, so raising ``d_max`` with the
    same seed can only grow each access set.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    demand_counts, supply_counts = block_counts(config)

    def draw_positions(counts: list[int]) -> np.ndarray:
        xs, ys = [], []
        for k, cnt in enumerate(counts):
            x_lo, x_hi, y_lo, y_hi = config.cell_bounds(k)
            xs.append(rng.uniform(x_lo, x_hi, size=cnt))
            ys.append(rng.uniform(y_lo, y_hi, size=cnt))
        return np.column_stack([np.concatenate(xs), np.concatenate(ys)])

    demand_pos = draw_positions(demand_counts)
    supply_pos = draw_positions(supply_counts)

    lo, hi = config.demand_range
    amounts = rng.integers(lo, hi, size=config.n_demand, endpoint=True)
    if config.capacity_range is not None:
        clo, chi = config.capacity_range
        caps = rng.integers(clo, chi, size=config.n_supply, endpoint=True).tolist()
    else:
        raw = rng.integers(lo, hi, size=config.n_supply, endpoint=True)
        target = int(round(config.supply_ratio * float(amounts.sum())))
        if raw.sum() == 0:
            raw = np.ones(config.n_supply, dtype=np.int64)
        caps = largest_remainder(target, raw.tolist())

    demands = [
        DemandSite(i, float(demand_pos[i, 0]), float(demand_pos[i, 1]), float(amounts[i]))
        for i in range(config.n_demand)
    ]
    supplies = [
        SupplySite(j, float(supply_pos[j, 0]), float(supply_pos[j, 1]), float(caps[j]))
        for j in range(config.n_supply)
    ]
    dummy_id = config.n_supply
    supplies.append(
        SupplySite(
            dummy_id,
            config.region[0] / 2.0,
            config.region[1] / 2.0,
            math.inf,
            is_dummy=True,
        )
    )

    # Access by Euclidean radius; the dummy is reachable from everywhere.
    dx = demand_pos[:, 0][:, None] - supply_pos[:, 0][None, :]
    dy = demand_pos[:, 1][:, None] - supply_pos[:, 1][None, :]
    dist = np.sqrt(dx * dx + dy * dy)
    access: dict[int, list[int]] = {}
    costs: dict[tuple[int, int], float] = {}
    for i in range(config.n_demand):
        reachable = np.nonzero(dist[i] <= config.d_max)[0]
        access[i] = [int(j) for j in reachable] + [dummy_id]
        for j in reachable:
            costs[(i, int(j))] = float(dist[i, j])
        costs[(i, dummy_id)] = float(config.dummy_cost)

    return TransportInstance(
        demands=demands,
        supplies=supplies,
        access=access,
        costs=costs,
        d_max=float(config.d_max),
        dummy_cost=float(config.dummy_cost),
    )


def validate_instance(inst: TransportInstance) -> list[str]:
    """Check every instance invariant; returns violation messages, never raises."""
    problems: list[str] = []
    demand_ids = [d.id for d in inst.demands]
    supply_ids = [s.id for s in inst.supplies]
    if len(set(demand_ids)) != len(demand_ids):
        problems.append("duplicate demand ids")
    if len(set(supply_ids)) != len(supply_ids):
        problems.append("duplicate supply ids")
    known_supply = set(supply_ids)

    dummies = [s for s in inst.supplies if s.is_dummy]
    if len(dummies) != 1:
        problems.append(f"expected exactly one dummy supplier, found {len(dummies)}")
        dummy_id = None
    else:
        dummy_id = dummies[0].id
        if not math.isinf(dummies[0].capacity):
            problems.append("dummy supplier must have unbounded capacity")

    for d in inst.demands:
        if d.demand < 0:
            problems.append(f"demand {d.id} has negative amount {d.demand}")
    for s in inst.supplies:
        if not s.is_dummy and not (0 <= s.capacity < math.inf):
            problems.append(f"supplier {s.id} has invalid capacity {s.capacity}")

    if set(inst.access) != set(demand_ids):
        problems.append("access map keys do not match demand ids")
    for d in inst.demands:
        acc = inst.access.get(d.id, [])
        if not acc:
            problems.append(f"demand {d.id} has empty access set")
            continue
        if any(b <= a for a, b in zip(acc, acc[1:])):
            problems.append(f"access set of demand {d.id} is not strictly ascending")
        for j in acc:
            if j not in known_supply:
                problems.append(f"demand {d.id} references unknown supplier {j}")
            elif (d.id, j) not in inst.costs:
                problems.append(f"access pair ({d.id}, {j}) has no cost")
        if dummy_id is not None:
            if dummy_id not in acc:
                problems.append(f"demand {d.id} cannot reach the dummy supplier")
            elif inst.costs.get((d.id, dummy_id)) != inst.dummy_cost:
                problems.append(
                    f"dummy cost for demand {d.id} is "
                    f"{inst.costs.get((d.id, dummy_id))}, expected {inst.dummy_cost}"
                )

    access_pairs = {(i, j) for i, acc in inst.access.items() for j in acc}
    for (i, j), w in inst.costs.items():
        if (i, j) not in access_pairs:
            problems.append(f"cost stored for non-access pair ({i}, {j})")
        elif not (w >= 0):
            problems.append(f"negative cost {w} for pair ({i}, {j})")
    return problems


# --- instance file format -------------------------------------------------
#
# Plain UTF-8 text, fixed field order:
#
#   transport-instance v1
#   n_demand <int>
#   n_supply <int>          (real suppliers; the dummy is extra)
#   n_access <int>
#   d_max <float>
#   dummy_cost <float>
#   demands
#   <id> <x> <y> <amount>            x n_demand
#   supplies
#   <id> <x> <y> <capacity> <dummy>  x n_supply + 1 ('inf' capacity allowed)
#   access
#   <demand> <supplier> <cost>       x n_access
#
# Floats are written with up to 17 significant digits so values survive a
# round trip exactly.

_MAGIC = "transport-instance v1"
_HEADER_FIELDS = ("n_demand", "n_supply", "n_access", "d_max", "dummy_cost")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_instance(inst: TransportInstance, path: str) -> None:
    lines = [_MAGIC]
    pairs = sorted(inst.costs)
    lines.append(f"n_demand {len(inst.demands)}")
    lines.append(f"n_supply {inst.n_supply}")
    lines.append(f"n_access {len(pairs)}")
    lines.append(f"d_max {_fmt(inst.d_max)}")
    lines.append(f"dummy_cost {_fmt(inst.dummy_cost)}")
    lines.append("demands")
    for d in sorted(inst.demands, key=lambda d: d.id):
        lines.append(f"{d.id} {_fmt(d.x)} {_fmt(d.y)} {_fmt(d.demand)}")
    lines.append("supplies")
    for s in sorted(inst.supplies, key=lambda s: s.id):
        lines.append(
            f"{s.id} {_fmt(s.x)} {_fmt(s.y)} {_fmt(s.capacity)} {int(s.is_dummy)}"
        )
    lines.append("access")
    for i, j in pairs:
        lines.append(f"{i} {j} {_fmt(inst.costs[(i, j)])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path: str):
        with open(path, encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    def next_line(self, what: str) -> tuple[int, str]:
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if line.strip():
                return self.pos, line.strip()
        raise ParseError(len(self.lines) + 1, f"unexpected end of file, expected {what}")

    def at_eof(self) -> bool:
        return all(not l.strip() for l in self.lines[self.pos :])


def _parse_number(lineno: int, fieldname: str, token: str, kind=float):
    try:
        return kind(token)
    except ValueError:
        raise ParseError(lineno, f"field '{fieldname}' has invalid value {token!r}")


def load_instance(path: str) -> TransportInstance:
    """Parse an instance file; raises :class:`ParseError` on any malformation."""
    r = _Reader(path)
    lineno, line = r.next_line("file magic")
    if line != _MAGIC:
        raise ParseError(lineno, f"expected '{_MAGIC}' header")

    header: dict[str, float] = {}
    for want in _HEADER_FIELDS:
        lineno, line = r.next_line(f"header field '{want}'")
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(lineno, f"expected '<field> <value>', got {line!r}")
        if parts[0] != want:
            raise ParseError(lineno, f"unknown field '{parts[0]}', expected '{want}'")
        kind = int if want.startswith("n_") else float
        header[want] = _parse_number(lineno, want, parts[1], kind)

    def expect_marker(name: str) -> None:
        lineno, line = r.next_line(f"'{name}' section")
        if line != name:
            raise ParseError(lineno, f"expected '{name}' section, got {line!r}")

    expect_marker("demands")
    demands = []
    for _ in range(int(header["n_demand"])):
        lineno, line = r.next_line("demand record")
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(lineno, f"demand record needs 4 fields, got {len(parts)}")
        demands.append(
            DemandSite(
                _parse_number(lineno, "id", parts[0], int),
                _parse_number(lineno, "x", parts[1]),
                _parse_number(lineno, "y", parts[2]),
                _parse_number(lineno, "demand", parts[3]),
            )
        )

    expect_marker("supplies")
    supplies = []
    for _ in range(int(header["n_supply"]) + 1):
        lineno, line = r.next_line("supply record")
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(lineno, f"supply record needs 5 fields, got {len(parts)}")
        flag = _parse_number(lineno, "dummy", parts[4], int)
        if flag not in (0, 1):
            raise ParseError(lineno, f"field 'dummy' must be 0 or 1, got {parts[4]}")
        supplies.append(
            SupplySite(
                _parse_number(lineno, "id", parts[0], int),
                _parse_number(lineno, "x", parts[1]),
                _parse_number(lineno, "y", parts[2]),
                _parse_number(lineno, "capacity", parts[3]),
                bool(flag),
            )
        )

    expect_marker("access")
    demand_ids = {d.id for d in demands}
    supply_ids = {s.id for s in supplies}
    access: dict[int, list[int]] = {d.id: [] for d in demands}
    costs: dict[tuple[int, int], float] = {}
    for _ in range(int(header["n_access"])):
        lineno, line = r.next_line("access record")
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, f"access record needs 3 fields, got {len(parts)}")
        i = _parse_number(lineno, "demand", parts[0], int)
        j = _parse_number(lineno, "supplier", parts[1], int)
        w = _parse_number(lineno, "cost", parts[2])
        if i not in demand_ids:
            raise ParseError(lineno, f"access references unknown demand {i}")
        if j not in supply_ids:
            raise ParseError(lineno, f"access references unknown supplier {j}")
        if (i, j) in costs:
            raise ParseError(lineno, f"duplicate access pair ({i}, {j})")
        access[i].append(j)
        costs[(i, j)] = w

    if not r.at_eof():
        lineno, line = r.next_line("end of file")
        raise ParseError(lineno, f"unexpected trailing content {line!r}")

    return TransportInstance(
        demands=demands,
        supplies=supplies,
        access=access,
        costs=costs,
        d_max=float(header["d_max"]),
        dummy_cost=float(header["dummy_cost"]),
    )


# --- general constraint-matrix form ----------------------------------------


@dataclass(frozen=True)
class Constraint:
    """One sparse linear constraint: sum(coefficients * x[indices]) <sense> rhs."""

    indices: tuple[int, ...]
    coefficients: tuple[float, ...]
    sense: str  # '<=', '>=' or '=='
    rhs: float


@dataclass
class GeneralProblem:
    """A separable linear objective over sparse linear constraints.

    This is the general carrier for co-occurrence analysis: which variables
    appear together in which constraints. Objective entries are the per-variable
    linear cost coefficients.
    """

    n_vars: int
    objective: tuple[float, ...]
    constraints: list[Constraint]

    def validate(self) -> None:
        if len(self.objective) != self.n_vars:
            raise ValueError("objective length must equal n_vars")
        for c in self.constraints:
            if c.sense not in ("<=", ">=", "=="):
                raise ValueError(f"unknown constraint sense {c.sense!r}")
            if len(c.indices) != len(c.coefficients):
                raise ValueError("constraint indices/coefficients length mismatch")
            if any(not (0 <= i < self.n_vars) for i in c.indices):
                raise ValueError("constraint references variable out of range")
            if any(not math.isfinite(a) for a in c.coefficients):
                raise ValueError("constraint coefficients must be finite")
