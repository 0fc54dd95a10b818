"""Quantitative (space-robustness) monitoring of STL formulas.

:func:`robustness` computes, bottom-up, the robustness *signal* of every
subformula on the window it is needed, and reads the root at ``t = 0``.
Temporal operators are evaluated with a monotone-deque sliding window
(Lemire) over the child's breakpoints, which is linear in the trace length.

Signals follow the trace's interpolation:

* ``step`` traces give right-continuous piecewise-constant signals.  The
  output of ``F[a,b]``/``G[a,b]`` changes only at ``tau - a`` and
  ``tau - b`` for child breakpoints ``tau``, so evaluating there is exact.
* ``linear`` traces give signals stored at breakpoints with linear
  interpolation in between.  Window extrema are taken over the window ends
  and the breakpoints inside; nested operators therefore see a piecewise
  linear reconstruction of their child.

:func:`robustness_oracle` evaluates the same semantics point by point with
no sliding windows and is meant for testing only.
"""

import bisect
import math
from dataclasses import dataclass

import numba
import numpy as np

from . import expr
from .errors import ModelError, MonitorError
from .stl import TOP, Always, And, Atomic, Eventually, Not, Or, TrueFormula, Until

__all__ = ["RobustnessValue", "robustness", "robustness_oracle", "robustness_signal"]

_REL = 1e-12


@dataclass(frozen=True)
class RobustnessValue:
    """``value`` is the robustness at time 0; ``undefined`` flags ``value == 0``."""

    value: float
    satisfied: bool
    undefined: bool

    @classmethod
    def of(cls, value):
        value = float(value)
        return cls(value, value > 0, value == 0)

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _tol(x):
    return _REL * max(1.0, abs(x))


@numba.njit(cache=True)
def _locate(times, x):
    """Last index ``i`` with ``times[i] <= x`` (within tolerance), at least 0."""
    xt = x + _tol(x)
    lo = 0
    hi = times.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if times[mid] <= xt:
            lo = mid + 1
        else:
            hi = mid
    return max(lo - 1, 0)


@numba.njit(cache=True)
def _interp(times, values, x):
    i = _locate(times, x)
    n = times.shape[0]
    if i >= n - 1 or abs(x - times[i]) <= _tol(x):
        return values[i]
    return values[i] + (values[i + 1] - values[i]) * (x - times[i]) / (times[i + 1] - times[i])


@numba.njit(cache=True)
def _lookup(times, values, queries, linear):
    out = np.empty(queries.shape[0])
    for k in range(queries.shape[0]):
        if linear:
            out[k] = _interp(times, values, queries[k])
        else:
            out[k] = values[_locate(times, queries[k])]
    return out


@numba.njit(cache=True)
def _merge(a, b):
    """Sorted union of two sorted arrays, merging values closer than the tolerance."""
    out = np.empty(a.shape[0] + b.shape[0])
    i = 0
    j = 0
    k = 0
    while i < a.shape[0] or j < b.shape[0]:
        if j >= b.shape[0] or (i < a.shape[0] and a[i] <= b[j]):
            v = a[i]
            i += 1
        else:
            v = b[j]
            j += 1
        if k == 0 or v > out[k - 1] + _tol(out[k - 1]):
            out[k] = v
            k += 1
    return out[:k].copy()


@numba.njit(cache=True)
def _window_step(times, values, lo, hi, sign):
    """``sign * max`` of ``sign * values`` over the segments meeting ``[lo_k, hi_k]``.

    ``lo`` and ``hi`` must be non-decreasing; runs in O(len(times) + len(lo)).
    """
    n = times.shape[0]
    q = lo.shape[0]
    out = np.empty(q)
    dq = np.empty(n, np.int64)
    head = 0
    tail = 0
    nxt = 0
    left = 0
    right = 0
    for k in range(q):
        a = lo[k] + _tol(lo[k])
        b = hi[k] + _tol(hi[k])
        while left + 1 < n and times[left + 1] <= a:
            left += 1
        while right + 1 < n and times[right + 1] <= b:
            right += 1
        while nxt <= right:
            v = sign * values[nxt]
            while tail > head and sign * values[dq[tail - 1]] <= v:
                tail -= 1
            dq[tail] = nxt
            tail += 1
            nxt += 1
        while dq[head] < left:
            head += 1
        out[k] = values[dq[head]]
    return out


@numba.njit(cache=True)
def _window_linear(times, values, lo, hi, sign):
    """Extremum of the interpolated signal over ``[lo_k, hi_k]``.

    Candidates are the two window ends and every breakpoint strictly inside.
    """
    n = times.shape[0]
    q = lo.shape[0]
    out = np.empty(q)
    dq = np.empty(n, np.int64)
    head = 0
    tail = 0
    nxt = 0
    first = 0
    for k in range(q):
        a = lo[k]
        b = hi[k]
        while first < n and times[first] <= a + _tol(a):
            first += 1
        while nxt < n and times[nxt] < b - _tol(b):
            v = sign * values[nxt]
            while tail > head and sign * values[dq[tail - 1]] <= v:
                tail -= 1
            dq[tail] = nxt
            tail += 1
            nxt += 1
        while head < tail and dq[head] < first:
            head += 1
        best = sign * _interp(times, values, a)
        vb = sign * _interp(times, values, b)
        if vb > best:
            best = vb
        if head < tail and sign * values[dq[head]] > best:
            best = sign * values[dq[head]]
        out[k] = sign * best
    return out


@numba.njit(cache=True)
def _until_step(t1, v1, t2, v2, starts, a, b):
    n1 = t1.shape[0]
    n2 = t2.shape[0]
    out = np.empty(starts.shape[0])
    for k in range(starts.shape[0]):
        s = starts[k]
        lo = s + a
        hi = s + b
        hi_t = hi + _tol(hi)
        i1 = _locate(t1, s)
        j1 = _locate(t1, lo)
        run = v1[i1]
        for i in range(i1 + 1, j1 + 1):
            if v1[i] < run:
                run = v1[i]
        j2 = _locate(t2, lo)
        cur2 = v2[j2]
        best = min(cur2, run)
        p1 = j1 + 1
        p2 = j2 + 1
        while True:
            n1t = t1[p1] if p1 < n1 else np.inf
            n2t = t2[p2] if p2 < n2 else np.inf
            nxt = min(n1t, n2t)
            if nxt > hi_t:
                break
            if n1t <= nxt + _tol(nxt):
                if v1[p1] < run:
                    run = v1[p1]
                p1 += 1
            if n2t <= nxt + _tol(nxt):
                cur2 = v2[p2]
                p2 += 1
            val = min(cur2, run)
            if val > best:
                best = val
        out[k] = best
    return out


@numba.njit(cache=True)
def _until_linear(t1, v1, t2, v2, starts, a, b):
    n1 = t1.shape[0]
    n2 = t2.shape[0]
    out = np.empty(starts.shape[0])
    for k in range(starts.shape[0]):
        s = starts[k]
        lo = s + a
        hi = s + b
        run = _interp(t1, v1, s)
        p1 = _locate(t1, s) + 1
        while p1 < n1 and t1[p1] < lo - _tol(lo):
            if v1[p1] < run:
                run = v1[p1]
            p1 += 1
        best = min(_interp(t2, v2, lo), min(run, _interp(t1, v1, lo)))
        run = min(run, _interp(t1, v1, lo))
        while p1 < n1 and t1[p1] <= lo + _tol(lo):
            p1 += 1
        p2 = _locate(t2, lo) + 1
        while True:
            n1t = t1[p1] if p1 < n1 else np.inf
            n2t = t2[p2] if p2 < n2 else np.inf
            nxt = min(n1t, n2t)
            if nxt >= hi - _tol(hi):
                break
            if n1t <= nxt + _tol(nxt):
                p1 += 1
            if n2t <= nxt + _tol(nxt):
                p2 += 1
            run = min(run, _interp(t1, v1, nxt))
            val = min(_interp(t2, v2, nxt), run)
            if val > best:
                best = val
        run = min(run, _interp(t1, v1, hi))
        val = min(_interp(t2, v2, hi), run)
        if val > best:
            best = val
        out[k] = best
    return out


# ---------------------------------------------------------------------------
# signal computation
# ---------------------------------------------------------------------------

_ATOMIC_CACHE = {}


def _atomic_values(node, traj, rows):
    names = traj.names
    key = (node.signal, names)
    fn = _ATOMIC_CACHE.get(key)
    if fn is None:
        missing = node.variables() - set(names)
        if missing:
            raise MonitorError(f"predicate {node.text!r} uses variables {sorted(missing)} absent from the trajectory")
        tr = expr.Translator({n: f"cols[{i}]" for i, n in enumerate(names)}, vector=True)
        try:
            body = tr(node.signal)
        except ModelError as exc:
            raise MonitorError(str(exc)) from None
        fn = expr.compile_function("_y", ["cols"], [f"return {body}"])
        _ATOMIC_CACHE[key] = fn
    cols = [traj.values[rows, i] for i in range(len(names))]
    size = len(range(*rows.indices(len(traj.times)))) if isinstance(rows, slice) else len(rows)
    with np.errstate(all="ignore"):
        y = np.broadcast_to(np.asarray(fn(cols), dtype=np.float64), (size,))
    return np.ascontiguousarray(y)


def _clip(times, horizon, linear):
    """Keep candidate start times in ``[0, horizon]``; linear signals also keep ``horizon``."""
    tol = _REL * max(1.0, horizon)
    times = times[(times >= -tol) & (times <= horizon + tol)]
    times = np.where(times < 0, 0.0, times)
    extra = [0.0, horizon] if linear else [0.0]
    return _merge(np.array(extra), np.ascontiguousarray(times))


def _signal(node, traj, horizon, linear):
    """Robustness signal of ``node`` as ``(times, values)`` covering ``[0, horizon]``."""
    if isinstance(node, TrueFormula):
        return np.zeros(1), np.full(1, TOP)
    if isinstance(node, Atomic):
        times = traj.times
        if linear:
            stop = np.searchsorted(times, horizon - _REL * max(1.0, horizon), side="left") + 1
        else:
            stop = np.searchsorted(times, horizon + _REL * max(1.0, horizon), side="right")
        stop = min(stop, len(times))
        return times[:stop], _atomic_values(node, traj, slice(0, stop))
    if isinstance(node, Not):
        t, v = _signal(node.arg, traj, horizon, linear)
        return t, -v
    if isinstance(node, (And, Or)):
        t1, v1 = _signal(node.left, traj, horizon, linear)
        t2, v2 = _signal(node.right, traj, horizon, linear)
        times = _merge(t1, t2)
        a = _lookup(t1, v1, times, linear)
        b = _lookup(t2, v2, times, linear)
        return times, (np.minimum(a, b) if isinstance(node, And) else np.maximum(a, b))
    if isinstance(node, (Eventually, Always)):
        lo, hi = node.lo, node.hi
        t, v = _signal(node.arg, traj, horizon + hi, linear)
        cand = _merge(t - lo, t - hi)
        if linear:
            cand = _merge(cand, t)
        starts = _clip(cand, horizon, linear)
        sign = 1.0 if isinstance(node, Eventually) else -1.0
        kernel = _window_linear if linear else _window_step
        return starts, kernel(t, v, starts + lo, starts + hi, sign)
    if isinstance(node, Until):
        lo, hi = node.lo, node.hi
        t1, v1 = _signal(node.left, traj, horizon + hi, linear)
        t2, v2 = _signal(node.right, traj, horizon + hi, linear)
        cand = _merge(_merge(t1, t1 - lo), _merge(t1 - hi, _merge(t2 - lo, t2 - hi)))
        if linear:
            cand = _merge(cand, t2)
        starts = _clip(cand, horizon, linear)
        kernel = _until_linear if linear else _until_step
        return starts, kernel(t1, v1, t2, v2, starts, lo, hi)
    raise TypeError(f"unknown formula node {type(node).__name__}")


def _check_horizon(formula, traj):
    depth = formula.depth
    if depth > traj.t_end * (1 + _REL):
        raise MonitorError(
            f"formula needs the trace up to time {depth:g} but the trajectory ends at {traj.t_end:g}"
        )
    missing = formula.variables() - set(traj.names)
    if missing:
        raise MonitorError(f"formula uses variables {sorted(missing)} absent from the trajectory")


def robustness_signal(formula, traj, horizon=0.0):
    """Robustness signal of ``formula`` over ``[0, horizon]`` as ``(times, values)``."""
    if formula.depth + horizon > traj.t_end * (1 + _REL):
        raise MonitorError(f"signal over [0, {horizon:g}] needs the trace up to {formula.depth + horizon:g}")
    _check_horizon(formula, traj)
    return _signal(formula, traj, float(horizon), traj.interpolation == "linear")


def robustness(formula, traj):
    """Robustness of ``formula`` on ``traj`` at time 0."""
    _check_horizon(formula, traj)
    times, values = _signal(formula, traj, 0.0, traj.interpolation == "linear")
    return RobustnessValue.of(values[0])


# ---------------------------------------------------------------------------
# reference oracle
# ---------------------------------------------------------------------------


def _ptol(x):
    return _REL * max(1.0, abs(x))


def _plocate(times, x):
    return max(bisect.bisect_right(times, x + _ptol(x)) - 1, 0)


def _pinterp(times, values, x):
    i = _plocate(times, x)
    if i >= len(times) - 1 or abs(x - times[i]) <= _ptol(x):
        return values[i]
    return values[i] + (values[i + 1] - values[i]) * (x - times[i]) / (times[i + 1] - times[i])


def _punion(*seqs):
    out = []
    for v in sorted(v for seq in seqs for v in seq):
        if not out or v > out[-1] + _ptol(out[-1]):
            out.append(v)
    return out


class _Oracle:
    """Point-wise evaluation of the monitor's semantics by direct recursion."""

    def __init__(self, traj):
        self.traj = traj
        self.linear = traj.interpolation == "linear"
        self.times = [float(t) for t in traj.times]

    def atomic_at_index(self, node, i):
        return float(_atomic_values(node, self.traj, np.array([i]))[0])

    def breakpoints(self, node, horizon):
        """Times at which the signal of ``node`` is stored (its candidate set)."""
        if isinstance(node, TrueFormula):
            return [0.0]
        if isinstance(node, Atomic):
            out = []
            for t in self.times:
                out.append(t)
                if self.linear and t >= horizon - _ptol(horizon):
                    break
                if not self.linear and t > horizon + _ptol(horizon):
                    out.pop()
                    break
            return out
        if isinstance(node, Not):
            return self.breakpoints(node.arg, horizon)
        if isinstance(node, (And, Or)):
            return _punion(self.breakpoints(node.left, horizon), self.breakpoints(node.right, horizon))
        lo, hi = node.lo, node.hi
        if isinstance(node, Until):
            b1 = self.breakpoints(node.left, horizon + hi)
            b2 = self.breakpoints(node.right, horizon + hi)
            cand = list(b1) + [t - lo for t in b1] + [t - hi for t in b1] + [t - lo for t in b2] + [t - hi for t in b2]
            if self.linear:
                cand += b2
        else:
            b = self.breakpoints(node.arg, horizon + hi)
            cand = [t - lo for t in b] + [t - hi for t in b]
            if self.linear:
                cand += b
        tol = _ptol(horizon)
        cand = [max(c, 0.0) for c in cand if -tol <= c <= horizon + tol]
        extra = [0.0, horizon] if self.linear else [0.0]
        return _punion(extra, cand)

    def value(self, node, t, horizon):
        """Signal of ``node`` at an arbitrary time ``t``."""
        if isinstance(node, TrueFormula):
            return TOP
        if isinstance(node, Atomic):
            bps = self.breakpoints(node, horizon)
            if self.linear:
                vals = [self.atomic_at_index(node, i) for i in range(len(bps))]
                return _pinterp(bps, vals, t)
            return self.atomic_at_index(node, _plocate(bps, t))
        if isinstance(node, Not):
            return -self.value(node.arg, t, horizon)
        bps = self.breakpoints(node, horizon)
        i = _plocate(bps, t)
        if not self.linear or i >= len(bps) - 1 or abs(t - bps[i]) <= _ptol(t):
            return self.direct(node, bps[i], horizon)
        v0 = self.direct(node, bps[i], horizon)
        v1 = self.direct(node, bps[i + 1], horizon)
        return v0 + (v1 - v0) * (t - bps[i]) / (bps[i + 1] - bps[i])

    def direct(self, node, s, horizon):
        """Value of ``node`` at one of its own breakpoints ``s``."""
        if isinstance(node, And):
            return min(self.value(node.left, s, horizon), self.value(node.right, s, horizon))
        if isinstance(node, Or):
            return max(self.value(node.left, s, horizon), self.value(node.right, s, horizon))
        if isinstance(node, Eventually):
            # F[a,b] phi  ==  T U[a,b] phi
            return self.until(TrueFormula(), node.arg, node.lo, node.hi, s, horizon)
        if isinstance(node, Always):
            # G[a,b] phi  ==  !F[a,b] !phi
            return -self.until(TrueFormula(), Not(node.arg), node.lo, node.hi, s, horizon)
        if isinstance(node, Until):
            return self.until(node.left, node.right, node.lo, node.hi, s, horizon)
        return self.value(node, s, horizon)

    def until(self, left, right, lo, hi, s, horizon):
        h = horizon + hi
        b1 = self.breakpoints(left, h)
        b2 = self.breakpoints(right, h)
        a_, b_ = s + lo, s + hi
        if self.linear:
            inner = [t for t in _punion(b1, b2) if a_ + _ptol(a_) < t < b_ - _ptol(b_)]
            cands = [a_] + inner + [b_]
        else:
            inner = [t for t in _punion(b1, b2) if a_ + _ptol(a_) < t <= b_ + _ptol(b_)]
            cands = [a_] + inner
        best = -math.inf
        for tp in cands:
            # min of the left signal over [s, tp]
            if self.linear:
                pts = [s] + [t for t in b1 if s + _ptol(s) < t < tp - _ptol(tp)] + [tp]
            else:
                pts = [s] + [t for t in b1 if s + _ptol(s) < t <= tp + _ptol(tp)]
            run = min(self.value(left, t, h) for t in pts)
            best = max(best, min(self.value(right, tp, h), run))
        return best


def robustness_oracle(formula, traj):
    """Reference robustness at time 0 by direct recursion (slow; tests only)."""
    _check_horizon(formula, traj)
    return RobustnessValue.of(_Oracle(traj).value(formula, 0.0, 0.0))
