import json
import math

import numpy as np
import pytest

from stochrobust.errors import StochRobustError
from stochrobust.gp import KernelConfig, fit
from stochrobust.model import parse_model
from stochrobust.optimize import (
    OptimizerConfig,
    Param,
    SearchSpace,
    gp_ucb_optimize,
    maximize,
    penalized_objective,
    ucb_acquisition,
)
from stochrobust.stats import summarize

BIRTH_DEATH = parse_model(
    "species X = 0; param c = 5; param d = 1;"
    "reaction b: -> X @ mass_action(c); reaction k: X -> @ mass_action(d);"
)


def _quadratic(point, rng):
    return -((point["x"] - 0.3) ** 2) + 0.01 * rng.standard_normal()


def test_param_and_space_validation():
    with pytest.raises(ValueError):
        Param("a", 2.0, 1.0)
    with pytest.raises(ValueError):
        Param("a", 0.0, math.inf)
    with pytest.raises(ValueError):
        Param("a", 0.0, 1.0, "both")
    with pytest.raises(ValueError):
        SearchSpace([])
    with pytest.raises(ValueError):
        SearchSpace([Param("a", 0, 1), Param("a", 1, 2)])


def test_unit_mapping():
    space = SearchSpace([Param("a", 50, 1000), Param("b", -1, 1)])
    x = np.array([[50, -1], [1000, 1], [525, 0]])
    assert np.allclose(space.to_unit(x), [[-1, -1], [1, 1], [0, 0]])
    assert np.allclose(space.from_unit(space.to_unit(x)), x)
    assert np.all(space.from_unit([[2.0, -3.0]]) == [[1000, -1]])
    assert space.as_dict([525, 0]) == {"a": 525.0, "b": 0.0}
    assert len(space.corners()) == 4


def test_grid_unit():
    g = SearchSpace([Param("a", 0, 1)]).grid_unit(30)
    assert g.shape == (30, 1) and g[0, 0] == -1 and g[-1, 0] == 1
    g = SearchSpace([Param("a", 0, 1), Param("b", 0, 1)]).grid_unit(25)
    assert g.shape == (25, 2)


def test_config_validation():
    for bad in ({"q": 1.5}, {"alpha": 1.0}, {"runs": 0}, {"beta_scale": "x"}, {"noise": "x"}, {"report": "x"}):
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)


def test_penalized_objective():
    s = summarize([1.0, 2.0, -3.0, 4.0])
    assert penalized_objective(s, 0.5, -100.0) == s.mean_rob
    assert penalized_objective(s, 0.95, -100.0) == pytest.approx(s.mean_rob - 100.0 * 0.2)


def test_ucb_ties_go_to_first_index():
    gp = fit(np.zeros((0, 1)), [], 1.0, KernelConfig(1.0))
    grid = np.linspace(-1, 1, 7)[:, None]
    cand, value = ucb_acquisition(gp, grid, 2.0)
    assert cand[0] == -1.0 and value == 2.0


def test_ucb_scaling_invariance():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-1, 1, (8, 2))
        y = rng.normal(size=8)
        noise = rng.uniform(0.01, 0.5, 8)
        grid = rng.uniform(-1, 1, (200, 2))
        c = float(rng.uniform(0.1, 50))
        base = ucb_acquisition(fit(x, y, noise, KernelConfig(1.3)), grid, 2.0)[0]
        # amplitude and noise are variances, so they scale by c**2
        scaled = ucb_acquisition(fit(x, c * y, c * c * noise, KernelConfig(1.3 * c * c)), grid, 2.0)[0]
        assert np.array_equal(base, scaled)


def test_maximize_is_reproducible_and_consistent():
    space = SearchSpace([Param("x", 0, 1)])
    cfg = OptimizerConfig(n_initial=8, noise_level=1e-4, runs=1)
    a = maximize(_quadratic, space, cfg, seed=5)
    b = maximize(_quadratic, space, cfg, seed=5)
    assert [e.to_record() for e in a.trace] == [e.to_record() for e in b.trace]
    assert a.best_score == max(e.penalized for e in a.trace)
    running = np.maximum.accumulate([e.penalized for e in a.trace])
    assert np.all(np.diff(running) >= 0)
    assert 0 <= a.best_point["x"] <= 1
    assert a.evaluations == len(a.trace) and a.total_runs == a.evaluations
    assert [e.action for e in a.trace[:8]] == ["initial"] * 8
    assert set(e.action for e in a.trace[8:]) <= {"ucb", "resample"}
    c = maximize(_quadratic, space, cfg, seed=6)
    assert [e.point for e in c.trace] != [e.point for e in a.trace]


def test_maximize_finds_quadratic_peak():
    space = SearchSpace([Param("x", 0, 1)])
    cfg = OptimizerConfig(n_initial=10, noise_level=1e-4, report="posterior")
    hits = 0
    for seed in range(5):
        r = maximize(_quadratic, space, cfg, seed)
        hits += abs(r.best_point["x"] - 0.3) <= 0.05
        assert r.evaluations <= 60
    assert hits >= 4


def test_evaluation_cap():
    space = SearchSpace([Param("x", 0, 1)])
    r = maximize(lambda p, rng: rng.standard_normal() * 100, space, OptimizerConfig(n_initial=3, max_evaluations=7))
    assert r.evaluations <= 7


def test_count_unimproved_never_evaluates_more():
    space = SearchSpace([Param("x", 0, 1)])
    for seed in range(3):
        base = maximize(_quadratic, space, OptimizerConfig(n_initial=6, noise_level=1e-4), seed)
        strict = maximize(_quadratic, space, OptimizerConfig(n_initial=6, noise_level=1e-4, count_unimproved=True), seed)
        assert strict.evaluations <= base.evaluations


def test_failed_evaluations_are_recorded():
    space = SearchSpace([Param("x", 0, 1)])

    def flaky(point, rng):
        if point["x"] > 0.8:
            raise StochRobustError("boom")
        return -point["x"]

    r = maximize(flaky, space, OptimizerConfig(n_initial=10, noise_level=1e-4), seed=1)
    assert r.failures and all("boom" in f["error"] for f in r.failures)
    assert all(e.point["x"] <= 0.8 for e in r.trace)


def test_gp_ucb_model_parameter():
    space = SearchSpace([Param("c", 1.0, 20.0)])
    cfg = OptimizerConfig(n_initial=5, runs=20, max_evaluations=15)
    r = gp_ucb_optimize(BIRTH_DEATH, "F[0,3] X >= 4", space, cfg, seed=0)
    assert r.best_point["c"] > 10
    assert r.total_runs == r.evaluations * 20
    assert r.alpha is not None and r.alpha < 0
    assert not r.trajectory_reuse
    again = gp_ucb_optimize(BIRTH_DEATH, "F[0,3] X >= 4", space, cfg, seed=0)
    assert [e.to_record() for e in again.trace] == [e.to_record() for e in r.trace]


def test_gp_ucb_probability_penalty():
    space = SearchSpace([Param("c", 1.0, 20.0)])
    cfg = OptimizerConfig(n_initial=4, runs=20, q=0.9, alpha=-1000.0, max_evaluations=8)
    r = gp_ucb_optimize(BIRTH_DEATH, "F[0,3] X >= 4", space, cfg, seed=0)
    for ev in r.trace:
        assert ev.penalized == penalized_objective(ev.summary, 0.9, -1000.0)


def test_gp_ucb_formula_parameters_reuse_trajectories(tmp_path):
    space = SearchSpace([Param("k", 0.0, 10.0, "formula"), Param("T", 1.0, 4.0, "formula")])
    cfg = OptimizerConfig(n_initial=4, initial_design="grid", runs=10, max_evaluations=10)
    r = gp_ucb_optimize(BIRTH_DEATH, ("F[0,T] X >= k", {}), space, cfg, seed=2)
    assert r.trajectory_reuse and r.total_runs == 10
    # lower thresholds and longer windows are always easier
    assert r.best_point["k"] < 5
    path = tmp_path / "trace.jsonl"
    r.write_trace(path)
    lines = [json.loads(s) for s in path.read_text().splitlines()]
    assert len(lines) == r.evaluations
    assert set(lines[0]) == {"iter", "point", "p_hat", "mean_rob", "penalized", "gp_amplitude", "action"}
    json.dumps(r.to_dict())


def test_parsed_formula_with_formula_params_rejected():
    from stochrobust.stl import parse_formula

    space = SearchSpace([Param("k", 0.0, 10.0, "formula")])
    with pytest.raises(ValueError):
        gp_ucb_optimize(BIRTH_DEATH, parse_formula("X >= 1"), space)
