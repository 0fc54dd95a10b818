"""Design the Schlögl production rate c3 for robust high-regime commitment.

Maximise average robustness of F[0,10] G[0,15] (X >= 300) over
c3 in [50, 1000], subject to a satisfaction probability of at least 0.75
(shortfall is penalised by alpha * (0.75 - p)).  Each evaluation simulates
100 fresh trajectories, so the objective is noisy.  Higher production
pushes the whole population into the high regime.

Run:  python3 demos/schlogl_design.py [seed]     (several minutes on one core)
"""

import sys
import time

from stochrobust import (
    SCHLOGL_FORMULA,
    SCHLOGL_FORMULA_PARAMS,
    OptimizerConfig,
    Param,
    SearchSpace,
    builtin_schlogl,
    gp_ucb_optimize,
    parse_formula,
)
from stochrobust.sim import default_jobs

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
phi = parse_formula(SCHLOGL_FORMULA, SCHLOGL_FORMULA_PARAMS)
space = SearchSpace([Param("c3", 50.0, 1000.0)])
cfg = OptimizerConfig(q=0.75, runs=100, jobs=default_jobs())

t = time.perf_counter()
r = gp_ucb_optimize(builtin_schlogl(), phi, space, cfg, seed=seed)
print(f"{r.evaluations} evaluations ({r.total_runs} runs) in {time.perf_counter() - t:.0f}s, alpha = {r.alpha:.1f}")
for ev in r.trace:
    print(f"  {ev.iter:3d} {ev.action:8s} c3 = {ev.point['c3']:7.1f}  p = {ev.summary.p_hat:.2f}"
          f"  mean_rob = {ev.summary.mean_rob:8.2f}  score = {ev.penalized:8.2f}")
s = r.best_summary
print(f"\nbest c3 = {r.best_point['c3']:.1f}: p = {s.p_hat:.2f}, mean_rob = {s.mean_rob:.2f}")
