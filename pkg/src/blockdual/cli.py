"""Command-line benchmark surface.

Subcommands: ``generate`` (seeded instances to file), ``partition`` (community
detection on the demand graph), ``solve`` (one decomposition method with a
trace CSV), ``compare`` (all methods on one instance, table-style CSV), and
``bound`` (theoretical gap-guarantee curve). All outputs are UTF-8 text/CSV;
every command is deterministic given its arguments, timings aside.
"""

from __future__ import annotations

import argparse
import configparser
import sys
import time

import numpy as np

from .community import greedy_agglomerate
from .decomposition import baseline_decomposition, classify_suppliers, dualized_count
from .graph import build_demand_graph
from .instance import (
    GeneratorConfig,
    GeneratorError,
    ParseError,
    TransportInstance,
    generate_instance,
    load_instance,
    save_instance,
)
from .lp import solve_full
from .subgradient import BoundParams, SolverParams, bound_curve, run

METHODS = ("baseline", "block", "distributed-block")


def _parse_pair(text: str, sep: str, kind, name: str):
    parts = text.split(sep)
    if len(parts) != 2:
        raise ValueError(f"{name} must look like '<a>{sep}<b>'")
    return kind(parts[0]), kind(parts[1])


def _config_from_args(args) -> GeneratorConfig:
    values = {
        "demands": args.demands,
        "supplies": args.supplies,
        "dmax": args.dmax,
        "seed": args.seed,
        "region": args.region,
        "grid": args.grid,
        "demand_range": args.demand_range,
        "ratio": args.ratio,
        "capacity_range": getattr(args, "capacity_range", None),
        "dummy_cost": args.dummy_cost,
        "block_weights": None,
    }
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            raise GeneratorError(f"cannot read config file {args.config}")
        section = parser["instance"] if parser.has_section("instance") else {}
        mapping = {
            "demands": int,
            "supplies": int,
            "dmax": float,
            "seed": int,
            "ratio": float,
            "dummy_cost": float,
            "region": str,
            "grid": str,
            "demand_range": str,
            "capacity_range": str,
            "block_weights": str,
        }
        for key, kind in mapping.items():
            if key in section and values.get(key) is None:
                values[key] = kind(section[key])
    if values["demands"] is None or values["supplies"] is None:
        raise GeneratorError("demand and supply counts are required")
    if values["dmax"] is None:
        raise GeneratorError("d_max is required")

    region = values["region"] or "300x300"
    grid = values["grid"] or "10x5"
    drange = values["demand_range"] or "2500:8000"
    weights = values["block_weights"]
    return GeneratorConfig(
        n_demand=int(values["demands"]),
        n_supply=int(values["supplies"]),
        d_max=float(values["dmax"]),
        seed=int(values["seed"] if values["seed"] is not None else 0),
        region=_parse_pair(region, "x", float, "region") if isinstance(region, str) else region,
        grid=_parse_pair(grid, "x", int, "grid") if isinstance(grid, str) else grid,
        block_weights=tuple(float(w) for w in weights.split(",")) if weights else None,
        demand_range=_parse_pair(drange, ":", int, "demand_range") if isinstance(drange, str) else drange,
        supply_ratio=float(values["ratio"] if values["ratio"] is not None else 1.2),
        capacity_range=_parse_pair(values["capacity_range"], ":", int, "capacity_range")
        if values["capacity_range"]
        else None,
        dummy_cost=float(values["dummy_cost"] if values["dummy_cost"] is not None else 1000.0),
    )


def _load_or_generate(args) -> TransportInstance:
    if getattr(args, "instance", None):
        return load_instance(args.instance)
    return generate_instance(_config_from_args(args))


def cmd_generate(args) -> int:
    config = _config_from_args(args)
    inst = generate_instance(config)
    save_instance(inst, args.out)
    print(
        f"wrote {args.out}: {inst.n_demand} demands, {inst.n_supply} suppliers "
        f"(+dummy), d_max={inst.d_max:g}, avg access {inst.average_access():.2f}, "
        f"{inst.n_variables()} variables"
    )
    return 0


def cmd_partition(args) -> int:
    inst = load_instance(args.instance)
    graph = build_demand_graph(inst)
    partition, trace = greedy_agglomerate(graph)
    if graph.total_weight <= 0:
        print("warning: demand graph has no edges; partition is all singletons", file=sys.stderr)
    if args.out:
        partition.save(args.out)
    if args.trace:
        trace.save_csv(args.trace)
    q = partition.modularity
    print(
        f"{partition.n_communities} communities over {graph.n_nodes} demands, "
        f"modularity {'undefined' if q is None else format(q, '.6f')}"
    )
    return 0


def _decompose(inst: TransportInstance, method: str):
    if method == "baseline":
        return baseline_decomposition(inst), None
    graph = build_demand_graph(inst)
    partition, _ = greedy_agglomerate(graph)
    return classify_suppliers(inst, partition), partition


def _solver_params(args, method: str, f_star: float | None = None) -> SolverParams:
    width = args.width
    if width is None:
        width = 3 if method == "distributed-block" else 1
    return SolverParams(
        step_c=args.step_c,
        gap_target=args.gap,
        max_iterations=args.max_iters,
        f_star=f_star,
        width=width if method == "distributed-block" else 1,
    )


def _run_method(inst, method, params):
    dec, partition = _decompose(inst, method)
    t0 = time.perf_counter()
    trace = run(inst, dec, params)
    elapsed = time.perf_counter() - t0
    return dec, partition, trace, elapsed


def cmd_solve(args) -> int:
    inst = _load_or_generate(args)
    params = _solver_params(args, args.method)
    dec, partition, trace, elapsed = _run_method(inst, args.method, params)
    if args.out:
        trace.save_csv(args.out)
    n_blocks = dec.n_blocks
    print(
        f"method={args.method} iterations={trace.iterations} "
        f"termination={trace.termination} gap={trace.gap[-1]:.4f} "
        f"seconds={elapsed:.2f} dualized={dualized_count(dec)} blocks={n_blocks}"
    )
    if trace.termination == "failure":
        return 1
    return 0


def cmd_compare(args) -> int:
    if args.config:
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            print(f"error: cannot read config file {args.config}", file=sys.stderr)
            return 1
        if parser.has_section("compare"):
            sec = parser["compare"]
            if args.methods is None and "methods" in sec:
                args.methods = sec["methods"]
            if args.out is None and "out" in sec:
                args.out = sec["out"]
        if parser.has_section("solve"):
            sec = parser["solve"]
            if "step_c" in sec:
                args.step_c = float(sec["step_c"])
            if "gap" in sec:
                args.gap = float(sec["gap"])
            if "max_iters" in sec:
                args.max_iters = int(sec["max_iters"])
            if "width" in sec and args.width is None:
                args.width = int(sec["width"])
    methods = [m.strip() for m in (args.methods or "baseline,block,distributed-block").split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            print(f"error: unknown method {m!r}", file=sys.stderr)
            return 2
    inst = _load_or_generate(args)
    reference = solve_full(inst)
    if reference.status != "optimal":
        print("error: reference solve failed", file=sys.stderr)
        return 1

    results = {}
    for method in methods:
        params = _solver_params(args, method, f_star=reference.objective)
        dec, _, trace, elapsed = _run_method(inst, method, params)
        if trace.termination == "failure":
            print(f"error: method {method} failed", file=sys.stderr)
            return 1
        results[method] = (dec, trace, elapsed)
        print(
            f"method={method} iterations={trace.iterations} gap={trace.gap[-1]:.4f} "
            f"seconds={elapsed:.2f} dualized={dualized_count(dec)} blocks={dec.n_blocks}"
        )

    def cell(method, pick):
        if method not in results:
            return ""
        return pick(results[method])

    n_blocks = ""
    for m in ("block", "distributed-block"):
        if m in results:
            n_blocks = results[m][0].n_blocks
            break
    header = (
        "n_demand,n_supply,n_vars,iters_baseline,iters_block,"
        "time_baseline,time_block,time_dist_block,n_blocks"
    )
    row = ",".join(
        str(x)
        for x in (
            inst.n_demand,
            inst.n_supply,
            inst.n_variables(),
            cell("baseline", lambda r: r[1].iterations),
            cell("block", lambda r: r[1].iterations)
            or cell("distributed-block", lambda r: r[1].iterations),
            cell("baseline", lambda r: f"{r[2]:.3f}"),
            cell("block", lambda r: f"{r[2]:.3f}"),
            cell("distributed-block", lambda r: f"{r[2]:.3f}"),
            n_blocks,
        )
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(header + "\n" + row + "\n")
        print(f"wrote {args.out}")
    else:
        print(header)
        print(row)
    return 0


def cmd_bound(args) -> int:
    bp = BoundParams(
        distance_bound=args.r, subgradient_bound=args.g, step_c=args.step_c
    )
    values = bound_curve(bp, args.iters)
    lines = ["t,bound"] + [f"{t + 1},{values[t]!r}" for t in range(len(values))]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    else:
        print("\n".join(lines))
    return 0


def _add_instance_options(p: argparse.ArgumentParser, with_file: bool) -> None:
    if with_file:
        p.add_argument("instance", nargs="?", help="instance file (omit to generate)")
    p.add_argument("--config", help="INI config file with an [instance] section")
    p.add_argument("--demands", type=int, help="number of demand locations")
    p.add_argument("--supplies", type=int, help="number of supply locations")
    p.add_argument("--dmax", type=float, help="access radius in miles")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument("--region", help="region size, e.g. 300x300")
    p.add_argument("--grid", help="spatial grid, e.g. 10x5")
    p.add_argument("--demand-range", dest="demand_range", help="integer demand range lo:hi")
    p.add_argument("--capacity-range", dest="capacity_range", help="integer capacity range lo:hi")
    p.add_argument("--ratio", type=float, help="total capacity / total demand (default 1.2)")
    p.add_argument("--dummy-cost", dest="dummy_cost", type=float, help="dummy supplier cost (default 1000)")


def _add_solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step-c", dest="step_c", type=float, default=1.0 / 80.0,
                   help="step size constant c in c/t (default 1/80)")
    p.add_argument("--gap", type=float, default=0.05, help="relative gap target (default 0.05)")
    p.add_argument("--max-iters", dest="max_iters", type=int, default=20000,
                   help="iteration cap (default 20000)")
    p.add_argument("--width", type=int, default=None,
                   help="parallel workers for distributed-block (default 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockdual",
        description="Decompose transportation LPs into community blocks and "
        "solve the relaxed dual by projected subgradient.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a seeded instance file")
    _add_instance_options(p, with_file=False)
    p.add_argument("--out", required=True, help="output instance file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("partition", help="detect communities on the demand graph")
    p.add_argument("instance", help="instance file")
    p.add_argument("--out", help="partition file (node_id community_id)")
    p.add_argument("--trace", help="merge trace CSV")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("solve", help="run one decomposition method")
    _add_instance_options(p, with_file=True)
    p.add_argument("--method", choices=METHODS, default="block")
    _add_solver_options(p)
    p.add_argument("--out", help="trace CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several methods on one instance")
    _add_instance_options(p, with_file=True)
    p.add_argument("--methods", help="comma-separated subset of: " + ",".join(METHODS))
    _add_solver_options(p)
    p.add_argument("--out", help="comparison table CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bound", help="emit the gap-guarantee curve")
    p.add_argument("--r", type=float, required=True, help="initial distance bound R")
    p.add_argument("--g", type=float, required=True, help="subgradient norm bound G")
    p.add_argument("--step-c", dest="step_c", type=float, default=1.0,
                   help="step constant for the 1/t schedule (default 1)")
    p.add_argument("--iters", type=int, default=100, help="horizon T (default 100)")
    p.add_argument("--out", help="bound CSV")
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GeneratorError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
