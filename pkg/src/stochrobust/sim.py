"""Trajectory generation: exact SSA for reaction networks, hazard-integrated
jump simulation for hybrid models, and reproducible ensembles.

Every run draws from its own counter-based stream (Philox keyed by the
master seed and the run index), so an ensemble is a pure function of
``(model, config, n, seed)`` however it is scheduled.
"""

import concurrent.futures as cf
import json
import multiprocessing as mp
import os
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ModelEvaluationError, RunError, StochRobustError
from .model import HybridModel, ReactionNetwork, model_hash

__all__ = [
    "Trajectory",
    "RngStream",
    "SimConfig",
    "ssa_simulate",
    "pdmp_simulate",
    "simulate",
    "sample_ensemble",
    "map_ensemble",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped samples of a multi-dimensional signal.

    ``interpolation`` is ``"step"`` (right-continuous, piecewise constant)
    or ``"linear"``.  The signal is defined on ``[0, t_end]``: a step trace
    holds its last value, a linear trace ends with a sample at ``t_end``.
    """

    times: np.ndarray
    values: np.ndarray
    names: tuple
    interpolation: str
    t_end: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        if self.interpolation not in ("step", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if times.ndim != 1 or len(times) < 1 or times[0] != 0.0:
            raise ValueError("times must be a nonempty sequence starting at 0")
        if values.shape != (len(times), len(self.names)):
            raise ValueError(f"values shape {values.shape} does not match {len(times)} times x {len(self.names)} names")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if times[-1] > self.t_end:
            raise ValueError("last sample lies beyond t_end")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name):
        return self.values[:, self.names.index(name)]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.names == other.names
            and self.interpolation == other.interpolation
            and self.t_end == other.t_end
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def at(self, t):
        """Value vector at time ``t`` under the trace's interpolation."""
        if t < 0 or t > self.t_end:
            raise ValueError(f"time {t} outside [0, {self.t_end}]")
        if self.interpolation == "step":
            i = np.searchsorted(self.times, t, side="right") - 1
            return self.values[i].copy()
        return np.array([np.interp(t, self.times, self.values[:, k]) for k in range(self.values.shape[1])])


@dataclass(frozen=True)
class RngStream:
    """Independent random stream for run ``index`` under ``seed``."""

    seed: int
    index: int = 0

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(self.index),))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings independent of any formula.

    ``step`` is the RK4 step for hybrid models (ignored for SSA).  Estimators
    read ``t_end=None`` as "the depth of the formula being monitored".
    """

    t_end: float | None
    step: float = 1.0


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _grow(times, states, k):
    cap = times.shape[0] * 2
    nt = np.empty(cap)
    ns = np.empty((cap, states.shape[1]))
    nt[:k] = times[:k]
    ns[:k] = states[:k]
    return nt, ns


@numba.njit
def _ssa_kernel(prop, x0, p, update, t_end, rng):
    m = update.shape[0]
    n = x0.shape[0]
    a = np.empty(m)
    cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, n))
    x = x0.copy()
    t = 0.0
    times[0] = 0.0
    states[0] = x
    k = 1
    while True:
        status = prop(x, p, a)
        if status != 0:
            return times[:k].copy(), states[:k].copy(), status, x
        a0 = 0.0
        for j in range(m):
            a0 += a[j]
        if a0 <= 0.0:
            break
        t += rng.standard_exponential() / a0
        if t >= t_end:
            break
        u = rng.random() * a0
        acc = 0.0
        chosen = -1
        for j in range(m):
            if a[j] > 0.0:
                chosen = j
                acc += a[j]
                if u < acc:
                    break
        for i in range(n):
            x[i] += update[chosen, i]
        if k == times.shape[0]:
            times, states = _grow(times, states, k)
        times[k] = t
        states[k] = x
        k += 1
    return times[:k].copy(), states[:k].copy(), 0, x


def ssa_simulate(network, t_end, rng):
    """Gillespie direct method up to ``t_end``.

    The state is recorded after every event; an absorbing state (zero total
    propensity) is held until ``t_end``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    x0 = network.initial_state()
    if not network.reactions:
        return Trajectory(np.zeros(1), x0[None, :], network.species_names, "step", float(t_end))
    times, states, status, x = _ssa_kernel(
        network.kernel(), x0, network.parameter_vector(), network.update, float(t_end), rng
    )
    if status:
        j = status - 1
        # re-evaluate in Python for a descriptive message
        try:
            network.propensity(j, x)
        except ModelEvaluationError:
            raise
        raise ModelEvaluationError(f"reaction {network.reactions[j].name!r}: invalid propensity at state {x}")
    return Trajectory(times, states, network.species_names, "step", float(t_end))


@numba.njit
def _rk4(flow, haz, x, d, p, h, fbuf, hbuf):
    """One RK4 step of the state augmented with the integrated total hazard.

    Returns ``(x_new, hazard_integral, ok)``.
    """
    n = x.shape[0]
    ks = np.empty((4, n))
    ls = np.empty(4)
    xt = x.copy()
    ok = True
    for stage in range(4):
        if flow(xt, d, p, fbuf) != 0 or haz(xt, d, p, hbuf) != 0:
            ok = False
        ks[stage] = fbuf
        ls[stage] = hbuf.sum()
        if stage < 3:
            scale = 0.5 * h if stage < 2 else h
            for i in range(n):
                xt[i] = x[i] + scale * ks[stage, i]
    out = np.empty(n)
    for i in range(n):
        out[i] = x[i] + h / 6.0 * (ks[0, i] + 2.0 * ks[1, i] + 2.0 * ks[2, i] + ks[3, i])
    return out, h / 6.0 * (ls[0] + 2.0 * ls[1] + 2.0 * ls[2] + ls[3]), ok


@numba.njit
def _pdmp_kernel(flow, haz, x0, d0, p, reset, t_end, h, rng, rtol):
    nx = x0.shape[0]
    nd = d0.shape[0]
    fbuf = np.empty(nx)
    hbuf = np.empty(reset.shape[0])
    cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, nx + nd))
    x = x0.copy()
    d = d0.copy()
    t = 0.0
    times[0] = 0.0
    states[0, :nx] = x
    states[0, nx:] = d
    k = 1
    lam = 0.0
    target = rng.standard_exponential()
    grid = 0
    n_grid = int(np.ceil(t_end / h - 1e-9))
    while grid < n_grid:
        t_next = (grid + 1) * h
        if grid + 1 == n_grid:
            t_next = t_end
        dt = t_next - t
        xn, dl, ok = _rk4(flow, haz, x, d, p, dt, fbuf, hbuf)
        if not ok:
            return times[:k].copy(), states[:k].copy(), 1
        if lam + dl >= target and dl > 0.0:
            # locate the crossing: one secant guess, then bisection
            lo = 0.0
            hi = dt
            tau = dt * (target - lam) / dl
            if tau > 0.0 and tau < dt:
                xs, ls, ok = _rk4(flow, haz, x, d, p, tau, fbuf, hbuf)
                if lam + ls >= target:
                    hi = tau
                else:
                    lo = tau
            while hi - lo > rtol * dt:
                mid = 0.5 * (lo + hi)
                xs, ls, ok = _rk4(flow, haz, x, d, p, mid, fbuf, hbuf)
                if lam + ls >= target:
                    hi = mid
                else:
                    lo = mid
            if hi < dt and t + hi < t_next:
                x, ls, ok = _rk4(flow, haz, x, d, p, hi, fbuf, hbuf)
                t = t + hi
            else:
                x = xn
                t = t_next
                grid += 1
            if haz(x, d, p, hbuf) != 0:
                return times[:k].copy(), states[:k].copy(), 2
            total = hbuf.sum()
            if total > 0.0:
                u = rng.random() * total
                acc = 0.0
                chosen = -1
                for j in range(hbuf.shape[0]):
                    if hbuf[j] > 0.0:
                        chosen = j
                        acc += hbuf[j]
                        if u < acc:
                            break
                for i in range(nd):
                    if reset[chosen, i] >= 0:
                        d[i] = reset[chosen, i]
            lam = 0.0
            target = rng.standard_exponential()
        else:
            lam += dl
            t = t_next
            x = xn
            grid += 1
        if k == times.shape[0]:
            times, states = _grow(times, states, k)
        times[k] = t
        states[k, :nx] = x
        states[k, nx:] = d
        k += 1
    return times[:k].copy(), states[:k].copy(), 0


def pdmp_simulate(model, t_end, rng, step=1.0):
    """Simulate a hybrid model with fixed-step RK4 between stochastic jumps.

    A jump fires when the integrated total hazard crosses a standard
    exponential draw; the crossing is located to ``1e-6`` of the step.
    Output holds continuous variables then discrete indices, sampled on the
    step grid plus jump instants, with linear interpolation.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not step > 0:
        raise ValueError("step must be positive")
    if step > t_end:
        raise ValueError(f"step {step} exceeds t_end {t_end}")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    flow, haz = model.kernels()
    reset = model.reset_matrix
    if reset.shape[0] == 0:
        reset = np.full((0, len(model.discrete)), -1, dtype=np.int64)
    times, states, status = _pdmp_kernel(
        flow,
        haz,
        model.initial_continuous(),
        model.initial_discrete(),
        model.parameter_vector(),
        reset,
        float(t_end),
        float(step),
        rng,
        1e-6,
    )
    if status:
        x = states[-1, : len(model.continuous)]
        d = states[-1, len(model.continuous) :].astype(np.int64)
        model.flow(x, d)
        model.hazards(x, d)
        raise ModelEvaluationError("flow or hazard evaluated to an invalid value during integration")
    names = model.continuous_names + model.discrete_names
    return Trajectory(times, states, names, "linear", float(t_end))


def simulate(model, config, rng):
    """Dispatch on the model kind."""
    if config.t_end is None:
        raise ValueError("simulation horizon t_end is not set")
    if isinstance(model, ReactionNetwork):
        return ssa_simulate(model, config.t_end, rng)
    if isinstance(model, HybridModel):
        return pdmp_simulate(model, config.t_end, rng, config.step)
    raise TypeError(f"cannot simulate {type(model).__name__}")


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def _identity(traj):
    return traj


def _run_chunk(model, config, seed, indices, fn):
    out = []
    for i in indices:
        try:
            out.append(fn(simulate(model, config, RngStream(seed, i))))
        except StochRobustError as exc:
            raise RunError(i, exc) from exc
    return out


def default_jobs():
    return os.cpu_count() or 1


def map_ensemble(model, config, n, seed, fn=_identity, jobs=1):
    """Simulate runs ``0..n-1`` and return ``[fn(trajectory_i)]`` in run order.

    With ``jobs > 1`` the runs are split into contiguous chunks evaluated in
    worker processes; results do not depend on ``jobs``.  ``fn`` must be
    picklable when ``jobs > 1``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("ensemble size must be at least 1")
    jobs = max(1, min(int(jobs or 1), n))
    if jobs == 1:
        return _run_chunk(model, config, seed, range(n), fn)
    # warm the numba kernels so forked workers inherit them
    simulate(model, SimConfig(min(config.t_end, config.step), config.step), RngStream(seed, 0))
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    ctx = mp.get_context("fork")
    with cf.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        futures = [
            pool.submit(_run_chunk, model, config, seed, range(lo, hi), fn)
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        results = []
        for fut in futures:
            results.extend(fut.result())
    return results


def sample_ensemble(model, config, n, seed, jobs=1):
    """``n`` trajectories; run ``i`` uses ``RngStream(seed, i)``."""
    return map_ensemble(model, config, n, seed, _identity, jobs)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj, path, seed=None, model=None, index=None):
    """Write ``t,<vars>`` rows plus a JSON metadata sidecar ``<path>.json``."""
    header = ",".join(["t", *traj.names])
    data = np.column_stack([traj.times, traj.values])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = {
        "seed": seed,
        "run": index,
        "model_hash": model_hash(model) if model is not None else None,
        "interpolation": traj.interpolation,
        "t_end": traj.t_end,
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def read_trajectory_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta_path = str(path) + ".json"
    interpolation, t_end = "step", float(data[-1, 0])
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        interpolation = meta.get("interpolation", interpolation)
        t_end = float(meta.get("t_end", t_end))
    return Trajectory(data[:, 0], data[:, 1:], header[1:], interpolation, t_end)
