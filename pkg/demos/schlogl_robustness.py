"""Robustness distribution of a bistability property in the Schlögl network.

The Schlögl network has two stable regimes (X around 85 and around 565)
separated by an unstable point near 248.  Starting on the separatrix, each
trajectory commits to one regime within a few time units.  The property

    F[0,10] G[0,15] (X >= 300)

asks that X reach the high regime and stay there for 15 time units.  Its
robustness is positive when satisfied, with magnitude the margin to 300.

Run:  python3 demos/schlogl_robustness.py [runs]
"""

import sys
import time

import numpy as np

from stochrobust import (
    SCHLOGL_FORMULA,
    SCHLOGL_FORMULA_PARAMS,
    builtin_schlogl,
    estimate,
    estimate_many,
    fluid_vector_field,
    parse_formula,
)
from stochrobust.sim import default_jobs

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
jobs = default_jobs()
model = builtin_schlogl()

# zeros of the mean drift.  With combinatorial propensities (X(X-1)/2 and
# X(X-1)(X-2)/6) the drift has three zeros: two stable regimes and the
# unstable point between them.  The fluid field reads the same constants as
# plain powers X^2 and X^3, which leaves a single fixed point.
names = [sp.name for sp in model.species]
ix = names.index("X")
state = np.array([sp.initial for sp in model.species], dtype=float)
update = model.update[:, ix]
xs = np.arange(3, 800)
drift, fluid = [], []
for x in xs:
    state[ix] = x
    drift.append(update @ model.propensities(state))
    fluid.append(fluid_vector_field(model, state)[ix])


def zeros(f):
    f = np.array(f)
    return xs[1:][np.sign(f[1:]) != np.sign(f[:-1])].tolist()


print("zeros of the stochastic drift near X =", zeros(drift))
print("fixed points of the fluid field near X =", zeros(fluid))

phi = parse_formula(SCHLOGL_FORMULA, SCHLOGL_FORMULA_PARAMS)
t = time.perf_counter()
s = estimate(model, phi, runs, seed=0, jobs=jobs)
print(f"\n{runs} runs in {time.perf_counter() - t:.1f}s")
print(f"  P(phi)          = {s.p_hat:.4f}  95% CI ({s.p_ci[0]:.4f}, {s.p_ci[1]:.4f})")
print(f"  E[R]            = {s.mean_rob:8.2f}")
print(f"  E[R | R > 0]    = {s.cond_pos:8.2f}")
print(f"  E[R | R < 0]    = {s.cond_neg:8.2f}")
print(f"  decomposition   = {s.p_hat * s.cond_pos + (1 - s.p_hat) * s.cond_neg:8.2f}")

# the robustness histogram is bimodal, one mode per regime
h = s.histogram
peak = h.counts.max()
print("\nrobustness histogram")
for lo, c in zip(h.edges[:-1], h.counts):
    if c:
        print(f"  {lo:8.1f} {'#' * int(40 * c / peak)}")

# probability and average robustness move together as the threshold varies;
# every threshold is monitored on the same trajectories
kts = np.arange(100, 601, 50)
many = estimate_many(
    model,
    [parse_formula(SCHLOGL_FORMULA, {**SCHLOGL_FORMULA_PARAMS, "kt": float(k)}) for k in kts],
    min(runs, 1000), seed=1, jobs=jobs,
)
print("\n   kt   p_hat  mean_rob")
for k, m in zip(kts, many):
    print(f"  {k:3d}  {m.p_hat:.3f}  {m.mean_rob:8.2f}")
print("corr(p_hat, mean_rob) =", round(np.corrcoef([m.p_hat for m in many], [m.mean_rob for m in many])[0, 1], 4))
