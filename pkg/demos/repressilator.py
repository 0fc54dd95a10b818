"""The stochastic repressilator as a piecewise-deterministic hybrid model.

Three proteins are produced while their gene's promoter is free and decay
linearly; promoters are bound and released by a repressor protein at random
times.  The property (default thresholds 20 and 60) asks for oscillation:
X1 keeps crossing both thresholds in every window over a 7000 time-unit
horizon.  Only formula parameters are varied in the design step, so one
ensemble of trajectories is re-monitored at every candidate point.

Run:  python3 demos/repressilator.py [runs]      (minutes on one core)
"""

import sys

import numpy as np

from stochrobust import (
    REPRESSILATOR_FORMULA,
    REPRESSILATOR_FORMULA_PARAMS,
    OptimizerConfig,
    Param,
    SearchSpace,
    SimConfig,
    builtin_repressilator,
    estimate,
    gp_ucb_optimize,
    parse_formula,
    sample_ensemble,
)
from stochrobust.sim import default_jobs

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
jobs = default_jobs()
model = builtin_repressilator()
print(REPRESSILATOR_FORMULA, REPRESSILATOR_FORMULA_PARAMS)

# a few trajectories: count level crossings of X1
for traj in sample_ensemble(model, SimConfig(7000.0), 5, seed=0, jobs=jobs):
    x = traj["X1"]
    cross = [int(np.count_nonzero((x[1:] >= k) != (x[:-1] >= k))) for k in (20, 60)]
    print(f"X1 in [{x.min():5.1f}, {x.max():5.1f}], crossings of 20/60: {cross}")

phi = parse_formula(REPRESSILATOR_FORMULA, REPRESSILATOR_FORMULA_PARAMS)
s = estimate(model, phi, runs, seed=1, jobs=jobs)
print(f"\n{runs} runs: p = {s.p_hat:.3f}, mean_rob = {s.mean_rob:.2f}, "
      f"E[R|R>0] = {s.cond_pos:.2f}, E[R|R<0] = {s.cond_neg:.2f}")

# longer observation windows T2 are easier to satisfy; T1 barely matters
space = SearchSpace([Param("T1", 0.0, 500.0, "formula"), Param("T2", 1000.0, 7000.0, "formula")])
cfg = OptimizerConfig(n_initial=25, initial_design="grid", runs=min(runs, 100), max_evaluations=40, jobs=jobs)
r = gp_ucb_optimize(model, (REPRESSILATOR_FORMULA, REPRESSILATOR_FORMULA_PARAMS), space, cfg, seed=0)
print(f"\n{r.evaluations} evaluations on {r.total_runs} shared trajectories")
print(f"best T1 = {r.best_point['T1']:.0f}, T2 = {r.best_point['T2']:.0f}: "
      f"p = {r.best_summary.p_hat:.2f}, mean_rob = {r.best_summary.mean_rob:.2f}")
