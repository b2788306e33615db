"""Block dual decomposition for transportation LPs.

Pipeline: generate or load an instance, build the demand co-occurrence graph,
detect communities by greedy modularity maximization, classify suppliers as
interior/boundary to obtain a block decomposition, then maximize the
Lagrangian dual with a projected subgradient method — sequentially or with
parallel block solves — and compare against the per-demand baseline.
"""

from .community import (
    MergeStep,
    MergeTrace,
    ModularityUndefinedError,
    Partition,
    greedy_agglomerate,
    modularity,
)
from .decomposition import (
    Decomposition,
    baseline_decomposition,
    classify_suppliers,
    dualized_count,
)
from .graph import WeightedGraph, build_cooccurrence_graph, build_demand_graph
from .instance import (
    Constraint,
    DemandSite,
    GeneralProblem,
    GeneratorConfig,
    GeneratorError,
    ParseError,
    SupplySite,
    TransportInstance,
    generate_instance,
    largest_remainder,
    load_instance,
    save_instance,
    validate_instance,
)
from .lp import (
    LpFailure,
    LpReport,
    PrimalSolution,
    dual_value,
    solve_block,
    solve_full,
    solve_singleton,
    solve_singleton_lp,
)
from .subgradient import (
    BoundParams,
    SolverParams,
    SolverTrace,
    bound_curve,
    compute_violations,
    run,
    running_average,
    step_size,
    update_multipliers,
)

__version__ = "0.1.0"

__all__ = [
    "BoundParams",
    "Constraint",
    "Decomposition",
    "DemandSite",
    "GeneralProblem",
    "GeneratorConfig",
    "GeneratorError",
    "LpFailure",
    "LpReport",
    "MergeStep",
    "MergeTrace",
    "ModularityUndefinedError",
    "ParseError",
    "Partition",
    "PrimalSolution",
    "SolverParams",
    "SolverTrace",
    "SupplySite",
    "TransportInstance",
    "WeightedGraph",
    "baseline_decomposition",
    "bound_curve",
    "build_cooccurrence_graph",
    "build_demand_graph",
    "classify_suppliers",
    "compute_violations",
    "dual_value",
    "dualized_count",
    "generate_instance",
    "greedy_agglomerate",
    "largest_remainder",
    "load_instance",
    "modularity",
    "run",
    "running_average",
    "save_instance",
    "solve_block",
    "solve_full",
    "solve_singleton",
    "solve_singleton_lp",
    "step_size",
    "update_multipliers",
    "validate_instance",
]
