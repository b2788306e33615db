"""Throwaway smoke test: kernel vs scipy on random instances."""
import math
import numpy as np
from scipy.optimize import linprog

from blockdual.instance import GeneratorConfig, generate_instance, validate_instance
from blockdual.lp import solve_full, build_arc_problem


def scipy_optimum(inst):
    pairs = sorted(inst.costs)
    col = {p: k for k, p in enumerate(pairs)}
    c = np.array([inst.costs[p] for p in pairs])
    rows_ub, rhs_ub = [], []
    # demand: sum x >= m  ->  -sum x <= -m
    for d in inst.demands:
        row = np.zeros(len(pairs))
        for j in inst.access[d.id]:
            row[col[(d.id, j)]] = -1.0
        rows_ub.append(row)
        rhs_ub.append(-d.demand)
    for s in inst.supplies:
        if s.is_dummy:
            continue
        served = inst.served_by()[s.id]
        if not served:
            continue
        row = np.zeros(len(pairs))
        for i in served:
            row[col[(i, s.id)]] = 1.0
        rows_ub.append(row)
        rhs_ub.append(s.capacity)
    res = linprog(c, A_ub=np.array(rows_ub), b_ub=np.array(rhs_ub), method="highs")
    assert res.status == 0, res.message
    return res.fun


rng = np.random.default_rng(7)
worst = 0.0
for trial in range(40):
    cfg = GeneratorConfig(
        n_demand=int(rng.integers(2, 12)),
        n_supply=int(rng.integers(1, 8)),
        d_max=float(rng.uniform(30, 200)),
        seed=int(rng.integers(0, 10**6)),
        region=(100.0, 100.0),
        grid=(2, 2),
        demand_range=(1, 50),
        supply_ratio=float(rng.uniform(0.3, 2.0)),
    )
    inst = generate_instance(cfg)
    assert validate_instance(inst) == []
    rep = solve_full(inst)
    assert rep.status == "optimal", rep
    ref = scipy_optimum(inst)
    rel = abs(rep.objective - ref) / max(1.0, abs(ref))
    worst = max(worst, rel)
    if rel > 1e-8:
        print("MISMATCH", trial, rep.objective, ref)
print("worst relative diff over 40 random instances:", worst)

# timing on a 500x500-scale instance
import time

cfg = GeneratorConfig(n_demand=500, n_supply=500, d_max=48.0, seed=11)
inst = generate_instance(cfg)
print("avg |J_i|:", inst.average_access(), "n_vars:", inst.n_variables())
t0 = time.perf_counter()
rep = solve_full(inst)
t1 = time.perf_counter()
print(f"solve_full 500x500: obj={rep.objective:.1f} pivots={rep.iterations} secs={t1-t0:.2f}")
