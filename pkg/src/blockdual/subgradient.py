"""Projected subgradient solver for the relaxed capacity constraints.

Each iteration solves every block sub-problem under the current multipliers,
assembles the dual value, measures the violation of each relaxed capacity
constraint, and takes a projected ascent step with the diminishing 1/t
schedule. Block solves are pure functions of (block, multipliers), so they may
run concurrently; results are always merged in block-index order, which makes
the multiplier trajectory identical for every concurrency width.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .decomposition import Decomposition
from .instance import TransportInstance
from .lp import ArcProblem, LpFailure, PrimalSolution, build_arc_problem, solve_arc_problem, solve_full

__all__ = [
    "SolverParams",
    "SolverTrace",
    "BoundParams",
    "step_size",
    "compute_violations",
    "update_multipliers",
    "run",
    "running_average",
    "bound_curve",
]


@dataclass(frozen=True)
class SolverParams:
    """Knobs for one subgradient solve.

    ``step_c`` scales the 1/t schedule. ``f_star`` is the reference optimum for
    the gap; when omitted it is computed up front from the full LP. ``width``
    is the number of parallel block-solving workers (1 = in-process
    sequential). Multiplier trajectories do not depend on ``width``.
    """

    step_c: float = 1.0 / 80.0
    gap_target: float = 0.05
    max_iterations: int = 20000
    f_star: float | None = None
    width: int = 1
    record_lambdas: bool = False

    def validate(self) -> None:
        if self.step_c <= 0:
            raise ValueError("step_c must be positive")
        if not (0 < self.gap_target <= 1):
            raise ValueError("gap_target must be in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.width < 1:
            raise ValueError("width must be at least 1")


@dataclass
class SolverTrace:
    """Per-iteration dual progress plus the final averaged primal iterate.

    ``dual_best`` is the highest dual value seen so far (the dual is
    maximized), so it is non-decreasing and ``gap`` non-increasing.
    """

    f_star: float
    t: list[int] = field(default_factory=list)
    dual: list[float] = field(default_factory=list)
    dual_best: list[float] = field(default_factory=list)
    gap: list[float] = field(default_factory=list)
    violation_norm: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    iterations: int = 0
    termination: str = ""
    final_multipliers: np.ndarray | None = None
    multiplier_history: list[np.ndarray] | None = None
    average_solution: PrimalSolution | None = None
    average_max_violation: float = 0.0

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t,g,g_best,gap,viol_norm2,seconds\n")
            for k in range(len(self.t)):
                fh.write(
                    f"{self.t[k]},{self.dual[k]!r},{self.dual_best[k]!r},"
                    f"{self.gap[k]!r},{self.violation_norm[k]!r},"
                    f"{self.seconds[k]:.6f}\n"
                )


def step_size(t: int, c: float) -> float:
    """Diminishing step c/t: non-summable, square-summable."""
    if t < 1:
        raise ValueError("iteration index starts at 1")
    if c <= 0:
        raise ValueError("step constant must be positive")
    return c / t


def update_multipliers(lam: np.ndarray, violations: np.ndarray, alpha: float) -> np.ndarray:
    """Projected ascent step: move along the violations, clip at zero."""
    return np.maximum(lam + alpha * violations, 0.0)


class _BlockState:
    """Prepared arc problem for one block plus its warm-start basis."""

    def __init__(self, prob: ArcProblem):
        self.prob = prob
        self.basis: list[int] | None = None
        mask = prob.lam_slot >= 0
        self.dual_arcs = np.nonzero(mask)[0]
        self.dual_slots = prob.lam_slot[mask]

    def solve(self, lam: np.ndarray) -> tuple[float, np.ndarray]:
        flows, obj, _, basis = solve_arc_problem(self.prob, lam, self.basis)
        if basis is not None:
            self.basis = basis
        return obj, flows


def _prepare_blocks(inst: TransportInstance, dec: Decomposition) -> list[_BlockState]:
    return [
        _BlockState(
            build_arc_problem(inst, dec.blocks[b], set(dec.interior[b]), dec.lambda_index)
        )
        for b in range(dec.n_blocks)
    ]


def _gather_violations(
    states: Sequence[_BlockState],
    flows_per_block: Sequence[np.ndarray],
    capacities: np.ndarray,
) -> np.ndarray:
    used = np.zeros(len(capacities))
    for state, flows in zip(states, flows_per_block):
        if len(state.dual_arcs):
            np.add.at(used, state.dual_slots, flows[state.dual_arcs])
    return used - capacities


def compute_violations(
    inst: TransportInstance,
    dec: Decomposition,
    flows: Mapping[tuple[int, int], float],
) -> np.ndarray:
    """Violation of each relaxed capacity constraint at a primal point.

    Entry k is the total flow into supplier ``dec.dualized[k]`` gathered across
    all blocks, minus its capacity. Accumulation runs in block-index order,
    matching the engine's per-iteration arithmetic exactly.
    """
    states = _prepare_blocks(inst, dec)
    per_block = []
    for state in states:
        x = np.array([flows.get(pair, 0.0) for pair in state.prob.pairs])
        per_block.append(x)
    caps = np.array([inst.supply_by_id(j).capacity for j in dec.dualized])
    return _gather_violations(states, per_block, caps)


def running_average(
    iterates: Sequence[Mapping[tuple[int, int], float]],
    inst: TransportInstance,
    dec: Decomposition,
) -> tuple[PrimalSolution, float]:
    """Average a sequence of primal iterates and report its worst violation.

    Returns the averaged flows with their true-cost objective, and the largest
    positive violation among the relaxed capacity constraints (0 when all are
    satisfied).
    """
    if not iterates:
        raise ValueError("need at least one primal iterate")
    acc: dict[tuple[int, int], float] = {}
    for x in iterates:
        for pair, v in x.items():
            acc[pair] = acc.get(pair, 0.0) + v
    avg = {pair: v / len(iterates) for pair, v in acc.items()}
    obj = math.fsum(inst.costs[pair] * v for pair, v in sorted(avg.items()))
    viol = compute_violations(inst, dec, avg)
    worst = float(np.max(viol, initial=0.0))
    return PrimalSolution(avg, obj), max(0.0, worst)


# --- distributed execution ---------------------------------------------------


def _worker_loop(conn, states: list[tuple[int, _BlockState]]) -> None:
    try:
        while True:
            msg = conn.recv()
            if msg is None:
                return
            lam = msg
            out = []
            for b, state in states:
                obj, flows = state.solve(lam)
                out.append((b, obj, flows))
            conn.send(("ok", out))
    except LpFailure as exc:
        conn.send(("error", str(exc)))
    except EOFError:
        return


class _Executor:
    """Runs block solves either in-process or on forked persistent workers.

    Blocks are assigned to workers round-robin by index and never migrate, so
    each block's warm-start basis chain is the same as in a sequential run.
    Results are returned indexed by block.
    """

    def __init__(self, states: list[_BlockState], width: int):
        self.states = states
        self.n_blocks = len(states)
        self.procs: list[mp.Process] = []
        self.conns = []
        width = min(width, max(1, self.n_blocks))
        if width > 1 and "fork" not in mp.get_all_start_methods():
            warnings.warn("fork unavailable; block solves run sequentially")
            width = 1
        self.width = width
        if width > 1:
            ctx = mp.get_context("fork")
            for w in range(width):
                mine = [(b, states[b]) for b in range(w, self.n_blocks, width)]
                parent, child = ctx.Pipe()
                proc = ctx.Process(target=_worker_loop, args=(child, mine), daemon=True)
                proc.start()
                child.close()
                self.procs.append(proc)
                self.conns.append(parent)

    def solve_all(self, lam: np.ndarray) -> tuple[list[float], list[np.ndarray]]:
        objs: list[float] = [0.0] * self.n_blocks
        flows: list[np.ndarray] = [None] * self.n_blocks  # type: ignore[list-item]
        if self.width == 1:
            for b, state in enumerate(self.states):
                objs[b], flows[b] = state.solve(lam)
            return objs, flows
        for conn in self.conns:
            conn.send(lam)
        failure = None
        for conn in self.conns:
            status, payload = conn.recv()
            if status == "error":
                failure = payload
                continue
            for b, obj, x in payload:
                objs[b] = obj
                flows[b] = x
        if failure is not None:
            raise LpFailure(failure)
        return objs, flows

    def close(self) -> None:
        for conn in self.conns:
            try:
                conn.send(None)
            except (BrokenPipeError, OSError):
                pass
        for proc in self.procs:
            proc.join(timeout=5)
            if proc.is_alive():
                proc.terminate()
        for conn in self.conns:
            conn.close()
        self.procs, self.conns = [], []


def run(inst: TransportInstance, dec: Decomposition, params: SolverParams) -> SolverTrace:
    """Maximize the dual by projected subgradient steps from zero multipliers.

    Stops when the relative gap to the reference optimum reaches
    ``params.gap_target`` or after ``params.max_iterations``. The trace records
    dual value, best dual value, gap, and violation norm every iteration, and
    the running average of the primal iterates at the end. An LP failure mid-
    run aborts with the trace so far and termination 'failure'.
    """
    params.validate()
    if params.f_star is not None:
        f_star = params.f_star
    else:
        report = solve_full(inst)
        if report.status != "optimal":
            raise LpFailure("reference solve failed")
        f_star = report.objective
    gap_scale = abs(f_star) if f_star != 0.0 else 1.0

    states = _prepare_blocks(inst, dec)
    caps = np.array([inst.supply_by_id(j).capacity for j in dec.dualized])
    dim = len(dec.dualized)
    lam = np.zeros(dim)
    trace = SolverTrace(f_star=f_star)
    if params.record_lambdas:
        trace.multiplier_history = []
    avg_sum = [np.zeros(s.prob.n_arcs) for s in states]
    best = -math.inf
    executor = _Executor(states, params.width)
    start = time.perf_counter()
    try:
        for t in range(1, params.max_iterations + 1):
            if params.record_lambdas:
                trace.multiplier_history.append(lam.copy())
            assert lam.min(initial=0.0) >= 0.0
            try:
                objs, flows = executor.solve_all(lam)
            except LpFailure:
                trace.iterations = t - 1
                trace.termination = "failure"
                break
            g = math.fsum(objs) - math.fsum(
                float(lam[k]) * caps[k] for k in range(dim)
            )
            best = max(best, g)
            h = _gather_violations(states, flows, caps)
            for b in range(len(states)):
                avg_sum[b] += flows[b]
            trace.t.append(t)
            trace.dual.append(g)
            trace.dual_best.append(best)
            gap = (f_star - best) / gap_scale
            trace.gap.append(gap)
            trace.violation_norm.append(float(np.linalg.norm(h)))
            trace.seconds.append(time.perf_counter() - start)
            trace.iterations = t
            if gap <= params.gap_target:
                trace.termination = "gap-target"
                break
            if t == params.max_iterations:
                trace.termination = "max-iterations"
                break
            lam = update_multipliers(lam, h, step_size(t, params.step_c))
    finally:
        executor.close()

    trace.final_multipliers = lam
    if trace.iterations > 0:
        avg_flows: dict[tuple[int, int], float] = {}
        for state, total in zip(states, avg_sum):
            mean = total / trace.iterations
            for a in mean.nonzero()[0]:
                avg_flows[state.prob.pairs[a]] = float(mean[a])
        obj = math.fsum(inst.costs[p] * v for p, v in sorted(avg_flows.items()))
        per_block = [
            np.array([avg_flows.get(pair, 0.0) for pair in s.prob.pairs]) for s in states
        ]
        viol = _gather_violations(states, per_block, caps)
        trace.average_solution = PrimalSolution(avg_flows, obj)
        trace.average_max_violation = max(0.0, float(np.max(viol, initial=0.0)))
    return trace


# --- theoretical bound -------------------------------------------------------


@dataclass(frozen=True)
class BoundParams:
    """Inputs for the dual-gap guarantee: distance and subgradient norm bounds.

    ``distance_bound`` bounds the distance from the initial multipliers to an
    optimal dual point; ``subgradient_bound`` bounds the violation norm. The
    step sequence is c/t when ``step_c`` is set, or the explicit ``steps``.
    """

    distance_bound: float
    subgradient_bound: float
    step_c: float | None = None
    steps: tuple[float, ...] | None = None

    def validate(self) -> None:
        if self.distance_bound < 0 or self.subgradient_bound < 0:
            raise ValueError("bounds must be nonnegative")
        if (self.step_c is None) == (self.steps is None):
            raise ValueError("give exactly one of step_c or steps")
        if self.step_c is not None and self.step_c <= 0:
            raise ValueError("step_c must be positive")


def bound_curve(bp: BoundParams, horizon: int) -> np.ndarray:
    """Guaranteed dual gap after t iterations, for t = 1..horizon.

    Value at t: (R^2 + G^2 * sum(alpha_k^2, k<=t)) / (2 * sum(alpha_k, k<=t)).
    """
    bp.validate()
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if bp.steps is not None:
        if len(bp.steps) < horizon:
            raise ValueError("explicit step list shorter than horizon")
        alpha = np.asarray(bp.steps[:horizon], dtype=float)
    else:
        alpha = bp.step_c / np.arange(1, horizon + 1)
    sum_alpha = np.cumsum(alpha)
    sum_alpha_sq = np.cumsum(alpha * alpha)
    r, g = bp.distance_bound, bp.subgradient_bound
    return (r * r + g * g * sum_alpha_sq) / (2.0 * sum_alpha)
