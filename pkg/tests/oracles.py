"""Independent reference implementations used only by the tests."""

import math

import numpy as np

from stochrobust.stl import TOP, Always, And, Atomic, Eventually, Not, Or, TrueFormula, Until


def mass_action_propensity(rate, reactants, counts):
    """``c * prod_i C(X_i, r_i)`` using exact integer binomials."""
    out = rate
    for name, r in reactants.items():
        out *= math.comb(int(counts[name]), r)
    return out


def schlogl_fluid(x, k1, k2, k3, k4, a, b):
    """Hand expansion of the Schlögl fluid field with ``c * prod X^r`` rates."""
    return k1 * a * x**2 - k2 * x**3 - k4 * x + k3 * b


def gp_dense(x, y, noise, amplitude, lengthscale, xq, jitter=1e-8):
    """Textbook GP posterior by explicit inverse: mean and variance at ``xq``."""
    x = np.atleast_2d(x)
    xq = np.atleast_2d(xq)

    def k(a, b):
        out = np.empty((len(a), len(b)))
        for i in range(len(a)):
            for j in range(len(b)):
                out[i, j] = amplitude * math.exp(-np.sum((a[i] - b[j]) ** 2) / (2 * lengthscale**2))
        return out

    m = float(np.mean(y))
    kxx = k(x, x) + np.diag(np.broadcast_to(noise, (len(x),)) + jitter * amplitude)
    inv = np.linalg.inv(kxx)
    ks = k(x, xq)
    mean = m + ks.T @ inv @ (np.asarray(y) - m)
    var = amplitude - np.einsum("ij,ik,kj->j", ks, inv, ks)
    return mean, var


def _value_at(traj, signal, t):
    i = int(np.searchsorted(traj.times, t + 1e-9, side="right")) - 1
    env = {name: float(traj.values[i, k]) for k, name in enumerate(traj.names)}
    return float(eval(signal, {"__builtins__": {}}, env))  # noqa: S307 - test-generated predicates


def dense_robustness(phi, traj, t=0.0, h=0.25):
    """Robustness of a step trace by brute force on a time grid of spacing ``h``.

    Exact when every breakpoint and interval bound is a multiple of ``h``.
    """
    if isinstance(phi, TrueFormula):
        return TOP
    if isinstance(phi, Atomic):
        return _value_at(traj, phi.signal, t)
    if isinstance(phi, Not):
        return -dense_robustness(phi.arg, traj, t, h)
    if isinstance(phi, And):
        return min(dense_robustness(phi.left, traj, t, h), dense_robustness(phi.right, traj, t, h))
    if isinstance(phi, Or):
        return max(dense_robustness(phi.left, traj, t, h), dense_robustness(phi.right, traj, t, h))
    grid = np.arange(phi.lo, phi.hi + h / 2, h) + t
    if isinstance(phi, Eventually):
        return max(dense_robustness(phi.arg, traj, s, h) for s in grid)
    if isinstance(phi, Always):
        return min(dense_robustness(phi.arg, traj, s, h) for s in grid)
    best = -math.inf
    left = [dense_robustness(phi.left, traj, s, h) for s in np.arange(t, t + phi.hi + h / 2, h)]
    for k, tp in enumerate(grid):
        run = min(left[: int(round((tp - t) / h)) + 1])
        best = max(best, min(dense_robustness(phi.right, traj, tp, h), run))
    return best


def dense_satisfies(phi, traj, t=0.0, h=0.25):
    """Boolean semantics on a step trace, ``y >= 0`` for atoms, on a grid of spacing ``h``."""
    if isinstance(phi, TrueFormula):
        return True
    if isinstance(phi, Atomic):
        return _value_at(traj, phi.signal, t) >= 0
    if isinstance(phi, Not):
        return not dense_satisfies(phi.arg, traj, t, h)
    if isinstance(phi, And):
        return dense_satisfies(phi.left, traj, t, h) and dense_satisfies(phi.right, traj, t, h)
    if isinstance(phi, Or):
        return dense_satisfies(phi.left, traj, t, h) or dense_satisfies(phi.right, traj, t, h)
    grid = np.arange(phi.lo, phi.hi + h / 2, h) + t
    if isinstance(phi, Eventually):
        return any(dense_satisfies(phi.arg, traj, s, h) for s in grid)
    if isinstance(phi, Always):
        return all(dense_satisfies(phi.arg, traj, s, h) for s in grid)
    for tp in grid:
        if dense_satisfies(phi.right, traj, tp, h) and all(
            dense_satisfies(phi.left, traj, s, h) for s in np.arange(t, tp + h / 2, h)
        ):
            return True
    return False
