"""Robustness distributions and their indicators from simulated ensembles."""

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .monitor import robustness
from .sim import SimConfig, map_ensemble

__all__ = [
    "Histogram",
    "RobustnessSummary",
    "summarize",
    "estimate",
    "estimate_many",
    "robustness_samples",
    "probability_ci",
    "histogram",
    "correlation",
]


@dataclass(frozen=True, eq=False)
class Histogram:
    """Bin ``i`` is ``[edges[i], edges[i+1])``; the last bin is closed."""

    edges: np.ndarray
    counts: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.edges, other.edges) and np.array_equal(self.counts, other.counts)

    __hash__ = None

    def to_dict(self):
        return {"edges": [float(e) for e in self.edges], "counts": [int(c) for c in self.counts]}


def histogram(samples, bins=50, range=None):
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("histogram of an empty sample set")
    if np.ndim(bins) == 0 and int(bins) < 1:
        raise ValueError("need at least one bin")
    counts, edges = np.histogram(samples, bins=bins, range=range)
    return Histogram(edges, counts)


def probability_ci(successes, n, level=0.95):
    """Wilson score interval for a binomial proportion."""
    if not (0 < level < 1):
        raise ValueError("level must lie in (0, 1)")
    if n < 1 or not (0 <= successes <= n):
        raise ValueError(f"need 0 <= successes <= n and n >= 1, got {successes}/{n}")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def correlation(xs, ys):
    """Pearson correlation coefficient."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise ValueError("correlation undefined for a constant sequence")
    return float(np.clip(np.corrcoef(xs, ys)[0, 1], -1.0, 1.0))


@dataclass(frozen=True)
class RobustnessSummary:
    n: int
    p_hat: float
    p_ci: tuple
    mean_rob: float
    mean_ci: tuple
    cond_pos: float | None
    cond_neg: float | None
    zero_count: int
    histogram: Histogram
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def decomposition_error(self):
        """``|E[R] - (p E[R|R>0] + (1-p) E[R|R<0])|`` relative to the scale of the terms."""
        pos = self.p_hat * (self.cond_pos or 0.0)
        neg = (1 - self.p_hat) * (self.cond_neg or 0.0)
        scale = max(1.0, abs(pos), abs(neg), abs(self.mean_rob))
        return abs(self.mean_rob - (pos + neg)) / scale

    def to_dict(self, **extra):
        out = {
            "n": self.n,
            "p_hat": self.p_hat,
            "p_ci": list(self.p_ci),
            "mean_rob": self.mean_rob,
            "mean_ci": list(self.mean_ci),
            "cond_pos": self.cond_pos,
            "cond_neg": self.cond_neg,
            "zero_count": self.zero_count,
            "histogram": self.histogram.to_dict(),
        }
        out.update(extra)
        return out


def summarize(samples, level=0.95, bins=50, keep_samples=True):
    """Indicators of a sample of robustness scores.

    Sums are exactly rounded (``math.fsum``), so the result depends only on
    the multiset of scores and ``mean_rob`` splits into the conditional
    means up to one rounding.  Scores equal to 0 enter neither conditional
    mean and are reported in ``zero_count``.
    """
    r = np.asarray(samples, dtype=float).ravel()
    n = r.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(r)):
        raise ValueError("robustness samples must be finite")
    pos = r[r > 0]
    neg = r[r < 0]
    s_pos = math.fsum(pos)
    s_neg = math.fsum(neg)
    mean = (s_pos + s_neg) / n
    var = math.fsum((r - mean) ** 2) / (n - 1)
    half = NormalDist().inv_cdf(0.5 + level / 2) * math.sqrt(var / n)
    return RobustnessSummary(
        n=n,
        p_hat=pos.size / n,
        p_ci=probability_ci(pos.size, n, level),
        mean_rob=mean,
        mean_ci=(mean - half, mean + half),
        cond_pos=s_pos / pos.size if pos.size else None,
        cond_neg=s_neg / neg.size if neg.size else None,
        zero_count=int(n - pos.size - neg.size),
        histogram=histogram(r, bins),
        samples=r if keep_samples else None,
    )


class _Scorer:
    """Robustness of several formulas on one trajectory (picklable for workers)."""

    def __init__(self, formulas):
        self.formulas = tuple(formulas)

    def __call__(self, traj):
        return np.array([robustness(f, traj).value for f in self.formulas])


def _config_for(formulas, config):
    """Fill in a missing horizon with the largest formula depth."""
    if config is not None and config.t_end is not None:
        return config
    depth = max(f.depth for f in formulas)
    step = config.step if config is not None else 1.0
    return SimConfig(depth if depth > 0 else max(step, 1.0), step)


def robustness_samples(model, formulas, n, seed, config=None, jobs=1):
    """``(n, len(formulas))`` scores; every formula sees the same ``n`` trajectories.

    Without ``config`` (or with ``config.t_end=None``) the horizon is the
    largest formula depth.
    """
    formulas = list(formulas)
    rows = map_ensemble(model, _config_for(formulas, config), n, seed, _Scorer(formulas), jobs)
    return np.vstack(rows)


def estimate(model, formula, n, seed, config=None, jobs=1, level=0.95, bins=50):
    """Robustness summary of ``formula`` over ``n`` simulated trajectories."""
    return estimate_many(model, [formula], n, seed, config, jobs, level, bins)[0]


def estimate_many(model, formulas, n, seed, config=None, jobs=1, level=0.95, bins=50):
    """One summary per formula, all computed on the same trajectories."""
    if int(n) < 2:
        raise ValueError("need at least 2 runs")
    scores = robustness_samples(model, formulas, n, seed, config, jobs)
    return [summarize(scores[:, k], level, bins) for k in range(scores.shape[1])]
