"""GP-UCB on a noisy one-dimensional objective with a known optimum.

The objective is -(theta - 0.3)^2 plus Gaussian noise (sd 0.01).  The loop
starts from a random design, then repeatedly evaluates the maximiser of the
upper confidence bound mu + beta*sigma over a fresh random grid, stopping
after three grid draws whose best bound cannot beat the incumbent.
"""

import numpy as np

from stochrobust import OptimizerConfig, Param, SearchSpace, fit, maximize, predict
from stochrobust.gp import KernelConfig


def objective(point, rng):
    return -((point["theta"] - 0.3) ** 2) + rng.normal(0.0, 0.01)


space = SearchSpace([Param("theta", 0.0, 1.0)])
cfg = OptimizerConfig(noise_level=1e-4, report="posterior")

found = []
for seed in range(10):
    r = maximize(objective, space, cfg, seed=seed)
    found.append(r.best_point["theta"])
    print(f"seed {seed}: theta* = {r.best_point['theta']:.4f} after {r.evaluations} evaluations")
print(f"within 0.05 of 0.3: {sum(abs(t - 0.3) <= 0.05 for t in found)}/10")

# the posterior of the last run, on the unit scale the GP works in
r = maximize(objective, space, cfg, seed=0)
x = space.to_unit(np.array([[ev.point["theta"]] for ev in r.trace]))
y = np.array([ev.penalized for ev in r.trace])
gp = fit(x, y, 1e-4, KernelConfig(float(0.6 * (y.max() - y.mean())), 0.5))
grid = np.linspace(-1, 1, 11)[:, None]
mean, var = predict(gp, grid)
print("\n theta   mean      sd")
for g, m, v in zip(space.from_unit(grid)[:, 0], mean, var):
    print(f"  {g:.1f}  {m:8.4f}  {np.sqrt(v):.4f}")
