"""GP-UCB maximisation of penalized average robustness.

The objective at a parameter point is the ensemble estimate of E[R] minus a
penalty ``alpha * |p_hat - q|`` when the satisfaction probability falls
short of ``q``.  A GP with an RBF kernel emulates the objective on inputs
standardized to ``[-1, 1]^d``; each step draws a fresh random grid of
candidates and evaluates the UCB maximiser if it could beat the incumbent.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gp as gpmod
from .errors import StochRobustError
from .model import HybridModel, ReactionNetwork
from .sim import SimConfig, sample_ensemble
from .stats import RobustnessSummary, _Scorer, estimate, summarize
from .stl import Formula, parse_formula

__all__ = [
    "Param",
    "SearchSpace",
    "OptimizerConfig",
    "Evaluation",
    "OptimizationResult",
    "penalized_objective",
    "ucb_acquisition",
    "maximize",
    "gp_ucb_optimize",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Param:
    """One search dimension; ``target`` is ``"model"`` or ``"formula"``."""

    name: str
    lower: float
    upper: float
    target: str = "model"

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper) and self.lower < self.upper):
            raise ValueError(f"parameter {self.name!r}: need finite lower < upper, got [{self.lower}, {self.upper}]")
        if self.target not in ("model", "formula"):
            raise ValueError(f"parameter {self.name!r}: target must be 'model' or 'formula'")


class SearchSpace:
    """Box of parameters, standardized to ``[-1, 1]^d``."""

    def __init__(self, params):
        self.params = tuple(p if isinstance(p, Param) else Param(*p) for p in params)
        if not self.params:
            raise ValueError("search space needs at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        self.lower = np.array([p.lower for p in self.params])
        self.upper = np.array([p.upper for p in self.params])

    @property
    def dim(self):
        return len(self.params)

    @property
    def names(self):
        return tuple(p.name for p in self.params)

    def names_for(self, target):
        return tuple(p.name for p in self.params if p.target == target)

    def to_unit(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower) - 1.0

    def from_unit(self, u):
        x = self.lower + (np.asarray(u, dtype=float) + 1.0) * 0.5 * (self.upper - self.lower)
        return np.clip(x, self.lower, self.upper)

    def as_dict(self, x):
        return {name: float(v) for name, v in zip(self.names, np.atleast_1d(x))}

    def random_unit(self, rng, n):
        return rng.uniform(-1.0, 1.0, size=(n, self.dim))

    def grid_unit(self, n):
        """Equi-spaced tensor grid with ``ceil(n ** (1/d))`` points per axis, endpoints included."""
        k = max(2, math.ceil(round(n ** (1.0 / self.dim), 9)))
        axis = np.linspace(-1.0, 1.0, k)
        return np.array(list(itertools.product(axis, repeat=self.dim)))

    def corners(self):
        return [np.array(c) for c in itertools.product(*zip(self.lower, self.upper))]


@dataclass(frozen=True)
class OptimizerConfig:
    n_initial: int = 30
    initial_design: str = "random"  # or "grid"
    grid_size: int = 200
    beta: float = 2.0
    beta_scale: str = "std"  # or "variance"
    runs: int = 100
    q: float = 0.0
    alpha: float | None = None
    max_resamplings: int = 3
    noise: str = "fixed"  # or "heteroscedastic"
    noise_level: float = 1.0
    lengthscale: float = 0.5
    amplitude_fraction: float = 0.6
    # evaluations that fail to improve the incumbent also count as resamplings
    count_unimproved: bool = False
    # reported best point: "observed" is the best observed score, "posterior"
    # the evaluated point with the best final posterior mean (denoised)
    report: str = "observed"
    max_evaluations: int = 500
    jobs: int = 1

    def __post_init__(self):
        for name in ("n_initial", "grid_size", "runs", "max_resamplings", "max_evaluations"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if self.alpha is not None and not self.alpha < 0:
            raise ValueError("alpha must be negative")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.beta_scale not in ("std", "variance"):
            raise ValueError("beta_scale must be 'std' or 'variance'")
        if self.noise not in ("fixed", "heteroscedastic"):
            raise ValueError("noise must be 'fixed' or 'heteroscedastic'")
        if self.report not in ("observed", "posterior"):
            raise ValueError("report must be 'observed' or 'posterior'")
        if self.initial_design not in ("random", "grid"):
            raise ValueError("initial_design must be 'random' or 'grid'")


@dataclass(frozen=True)
class Evaluation:
    iter: int
    point: dict
    penalized: float
    summary: RobustnessSummary | None
    noise: float
    gp_amplitude: float | None
    action: str

    def to_record(self):
        s = self.summary
        return {
            "iter": self.iter,
            "point": self.point,
            "p_hat": None if s is None else s.p_hat,
            "mean_rob": None if s is None else s.mean_rob,
            "penalized": self.penalized,
            "gp_amplitude": self.gp_amplitude,
            "action": self.action,
        }


@dataclass(frozen=True)
class OptimizationResult:
    best_point: dict
    best_score: float
    best_summary: RobustnessSummary | None
    trace: list
    evaluations: int
    total_runs: int
    alpha: float | None
    failures: list = field(default_factory=list)
    trajectory_reuse: bool = False

    def to_dict(self):
        s = self.best_summary
        return {
            "best_point": self.best_point,
            "best_score": self.best_score,
            "best_summary": None if s is None else s.to_dict(),
            "evaluations": self.evaluations,
            "total_runs": self.total_runs,
            "alpha": self.alpha,
            "failures": self.failures,
            "trajectory_reuse": self.trajectory_reuse,
        }

    def write_trace(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for ev in self.trace:
                fh.write(json.dumps(ev.to_record(), sort_keys=True) + "\n")


def penalized_objective(summary, q, alpha):
    """``mean_rob + alpha * |p_hat - q|`` if ``p_hat < q``, else ``mean_rob``."""
    if summary.p_hat < q:
        return summary.mean_rob + alpha * abs(summary.p_hat - q)
    return summary.mean_rob


def ucb_acquisition(gp, grid, beta=2.0, scale="std"):
    """``(candidate, value)`` maximising ``mu + beta * s`` over ``grid``.

    ``s`` is the posterior standard deviation, or the variance with
    ``scale="variance"``.  Ties go to the lowest grid index.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 0:
        raise ValueError("empty candidate grid")
    mean, var = gpmod.predict(gp, grid)
    spread = np.sqrt(var) if scale == "std" else var
    ucb = mean + beta * spread
    i = int(np.argmax(ucb))
    return grid[i], float(ucb[i])


def _seed_for(seed, k):
    return int(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(1, k)).generate_state(1, np.uint64)[0])


def _amplitude(scores, fraction):
    scores = np.asarray(scores, dtype=float)
    amp = fraction * (scores.max() - scores.mean())
    # all observations equal: fall back to a unit prior variance
    return float(amp) if amp > 0 and math.isfinite(amp) else 1.0


class _Loop:
    """State of one optimisation run over a generic evaluator.

    ``evaluate(x, k)`` takes a point in original units and an evaluation
    index and returns ``(summary_or_None, raw_score, noise_variance)``;
    ``raw_score`` is used directly when ``summary`` is None.
    """

    def __init__(self, evaluate, space, config, seed):
        self.evaluate = evaluate
        self.space = space
        self.config = config
        self.rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(0,)))
        )
        self.units = []
        self.obs = []  # (summary, raw, noise)
        self.trace = []
        self.failures = []
        self.alpha = config.alpha
        self.k = 0

    def score(self, summary, raw):
        if summary is None:
            return raw
        alpha = self.alpha if self.alpha is not None else -1.0
        return penalized_objective(summary, self.config.q, alpha)

    def run_one(self, u, action, amplitude):
        x = self.space.from_unit(u)
        k = self.k
        self.k += 1
        try:
            summary, raw, noise = self.evaluate(x, k)
        except StochRobustError as exc:
            log.warning("evaluation %d at %s failed: %s", k, self.space.as_dict(x), exc)
            self.failures.append({"iter": k, "point": self.space.as_dict(x), "error": str(exc)})
            return None
        self.units.append(np.asarray(u, dtype=float))
        self.obs.append((summary, raw, noise))
        ev = Evaluation(k, self.space.as_dict(x), self.score(summary, raw), summary, noise, amplitude, action)
        self.trace.append(ev)
        return ev

    def rescore(self):
        self.trace = [replace(ev, penalized=self.score(ev.summary, ob[1])) for ev, ob in zip(self.trace, self.obs)]

    def run(self):
        cfg = self.config
        if cfg.initial_design == "grid":
            initial = self.space.grid_unit(cfg.n_initial)
        else:
            initial = self.space.random_unit(self.rng, cfg.n_initial)
        for u in initial:
            self.run_one(u, "initial", None)
        if not self.trace:
            raise StochRobustError("all initial evaluations failed")
        if self.alpha is None and any(ob[0] is not None for ob in self.obs):
            raw = [ob[0].mean_rob for ob in self.obs]
            self.alpha = -10.0 * _amplitude(raw, cfg.amplitude_fraction)
        self.rescore()

        stale = 0
        resampled = False
        post = self.fit()
        best = max(ev.penalized for ev in self.trace)
        while stale < cfg.max_resamplings and len(self.trace) < cfg.max_evaluations:
            grid = self.space.random_unit(self.rng, cfg.grid_size)
            cand, value = ucb_acquisition(post, grid, cfg.beta, cfg.beta_scale)
            if value > best:
                ev = self.run_one(cand, "resample" if resampled else "ucb", post.kernel.amplitude)
                resampled = False
                if ev is not None:
                    post = self.fit()
                if ev is not None and ev.penalized > best:
                    best = ev.penalized
                    stale = 0
                elif cfg.count_unimproved:
                    stale += 1
            else:
                stale += 1
                resampled = True
        self.final = post
        return self.result()

    def fit(self):
        cfg = self.config
        scores = np.array([ev.penalized for ev in self.trace])
        amp = _amplitude(scores, cfg.amplitude_fraction)
        if cfg.noise == "fixed":
            noise = np.full(len(scores), cfg.noise_level)
        else:
            noise = np.array([ev.noise for ev in self.trace])
        return gpmod.fit(np.array(self.units), scores, noise, gpmod.KernelConfig(amp, cfg.lengthscale))

    def result(self):
        if self.config.report == "observed":
            i = int(np.argmax([ev.penalized for ev in self.trace]))
        else:
            i = int(np.argmax(gpmod.predict(self.final, np.array(self.units))[0]))
        best = self.trace[i]
        return OptimizationResult(
            best_point=best.point,
            best_score=best.penalized,
            best_summary=best.summary,
            trace=list(self.trace),
            evaluations=len(self.trace),
            total_runs=len(self.trace) * self.config.runs,
            alpha=self.alpha,
            failures=list(self.failures),
        )


def maximize(fn, space, config=None, seed=0):
    """GP-UCB on a black-box ``fn(point_dict, rng) -> score``.

    ``fn`` may also return ``(score, noise_variance)``.  No probability
    penalty is applied.
    """
    config = config or OptimizerConfig()

    def evaluate(x, k):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(_seed_for(seed, k))))
        out = fn(space.as_dict(x), rng)
        score, noise = (out if isinstance(out, tuple) else (out, config.noise_level))
        return None, float(score), float(noise)

    return _Loop(evaluate, space, config, seed).run()


def _score_noise(summary):
    r = summary.samples
    return float(np.var(r, ddof=1) / r.size) if r is not None and r.size > 1 else 1.0


def _resolve_formula(formula, params):
    if callable(formula) and not isinstance(formula, Formula):
        return formula(params)
    if isinstance(formula, Formula):
        return formula
    if isinstance(formula, str):
        return parse_formula(formula, params)
    text, base = formula
    return parse_formula(text, {**base, **params})


def _resolve_model(model, params):
    if isinstance(model, (ReactionNetwork, HybridModel)):
        return model.with_parameters(params) if params else model
    return model(params)


def gp_ucb_optimize(model, formula, space, config=None, seed=0, sim_config=None):
    """Maximise penalized average robustness over ``space``.

    ``model`` is a model (model parameters are applied with
    ``with_parameters``) or a callable ``params -> model``.  ``formula`` is a
    :class:`Formula`, a text, a ``(text, base_params)`` pair or a callable
    ``params -> Formula``; formula parameters are substituted at parse time.

    When only formula parameters vary, ``runs`` trajectories are simulated
    once, up to the deepest formula over the box, and re-monitored at
    every point.
    """
    config = config or OptimizerConfig()
    model_names = space.names_for("model")
    formula_names = space.names_for("formula")
    if formula_names and isinstance(formula, Formula):
        raise ValueError("formula parameters need a formula text or a callable, not a parsed formula")

    def split(x):
        point = space.as_dict(x)
        return {n: point[n] for n in model_names}, {n: point[n] for n in formula_names}

    if not model_names:
        depth = max(_resolve_formula(formula, split(c)[1]).depth for c in space.corners())
        step = sim_config.step if sim_config is not None else 1.0
        cfg = sim_config if sim_config is not None and sim_config.t_end is not None else None
        cfg = cfg or SimConfig(depth if depth > 0 else max(step, 1.0), step)
        if cfg.t_end < depth:
            raise ValueError(f"simulation horizon {cfg.t_end} is shorter than the deepest formula ({depth})")
        base = _resolve_model(model, {})
        trajectories = sample_ensemble(base, cfg, config.runs, _seed_for(seed, 0), config.jobs)

        def evaluate(x, k):
            phi = _resolve_formula(formula, split(x)[1])
            scores = np.array([_Scorer([phi])(tr)[0] for tr in trajectories])
            summary = summarize(scores)
            return summary, summary.mean_rob, _score_noise(summary)

        result = _Loop(evaluate, space, config, seed).run()
        return replace(result, total_runs=config.runs, trajectory_reuse=True)

    def evaluate(x, k):
        mp, fp = split(x)
        phi = _resolve_formula(formula, fp)
        m = _resolve_model(model, mp)
        summary = estimate(m, phi, config.runs, _seed_for(seed, k), sim_config, config.jobs)
        return summary, summary.mean_rob, _score_noise(summary)

    return _Loop(evaluate, space, config, seed).run()
