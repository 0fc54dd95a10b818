import math

import numpy as np
import pytest
from scipy import stats as sps

from stochrobust.builtins import builtin_repressilator, builtin_schlogl
from stochrobust.errors import ModelEvaluationError, RunError
from stochrobust.model import (
    ContinuousVariable,
    DiscreteVariable,
    HybridModel,
    Jump,
    Reaction,
    ReactionNetwork,
    Species,
    parse_model,
)
from stochrobust.sim import (
    RngStream,
    SimConfig,
    Trajectory,
    map_ensemble,
    pdmp_simulate,
    read_trajectory_csv,
    sample_ensemble,
    simulate,
    ssa_simulate,
    write_trajectory_csv,
)


def _decay_model(kp=1.0, kd=0.01, x0=0.0):
    return HybridModel(
        [DiscreteVariable("g", ("on",))],
        [ContinuousVariable("X", x0)],
        {"X": "kp - kd*X"},
        [],
        {"kp": kp, "kd": kd},
    )


def _poisson_clock(lam):
    # a single continuous variable that never moves and a two-state toggle firing at rate lam
    return HybridModel(
        [DiscreteVariable("g", ("a", "b"))],
        [ContinuousVariable("X", 1.0)],
        {"X": "0"},
        [Jump("ab", "g==a", "lam", {"g": "b"}), Jump("ba", "g==b", "lam", {"g": "a"})],
        {"lam": lam},
    )


# -- Trajectory ---------------------------------------------------------------


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], [[1], [2]], ["X"], "step", 1.0)
    with pytest.raises(ValueError):
        Trajectory([0.5], [[1]], ["X"], "step", 1.0)
    with pytest.raises(ValueError):
        Trajectory([0.0, 2.0], [[1], [2]], ["X"], "step", 1.0)
    with pytest.raises(ValueError):
        Trajectory([0.0], [[1]], ["X"], "cubic", 1.0)


def test_trajectory_at():
    step = Trajectory([0.0, 1.0, 3.0], [[0], [2], [4]], ["X"], "step", 5.0)
    assert step.at(0.999)[0] == 0 and step.at(1.0)[0] == 2 and step.at(5.0)[0] == 4
    lin = Trajectory([0.0, 2.0], [[0], [4]], ["X"], "linear", 2.0)
    assert lin.at(0.5)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lin.at(2.5)


# -- SSA ------------------------------------------------------------------------


def test_no_reactions_single_row():
    net = ReactionNetwork([Species("X", 7)], [], {})
    traj = ssa_simulate(net, 10.0, RngStream(0))
    assert len(traj) == 1 and traj.t_end == 10.0 and traj.at(10.0)[0] == 7


def test_ssa_rejects_bad_horizon():
    with pytest.raises(ValueError):
        ssa_simulate(builtin_schlogl(), 0.0, RngStream(0))


def test_ssa_structure_on_schlogl():
    net = builtin_schlogl()
    traj = ssa_simulate(net, 2.0, RngStream(11, 3))
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(traj.values >= 0)
    assert np.array_equal(traj.values, np.round(traj.values))
    steps = np.diff(traj.values, axis=0)
    allowed = {tuple(u) for u in net.update.tolist()}
    assert all(tuple(s) in allowed for s in steps.tolist())


def test_pure_death_hitting_time():
    c, n0, runs = 0.5, 10, 10000
    net = parse_model(f"species X = {n0}; param c = {c}; reaction d: X -> @ mass_action(c);")
    hits = np.empty(runs)
    for i in range(runs):
        traj = ssa_simulate(net, 200.0, RngStream(5, i))
        assert traj.values[-1, 0] == 0
        hits[i] = traj.times[-1]
    want = sum(1 / (c * i) for i in range(1, n0 + 1))
    se = hits.std(ddof=1) / math.sqrt(runs)
    assert abs(hits.mean() - want) < 3 * se


def test_constant_inflow_event_count():
    c, t_end, runs = 3.0, 2.0, 10000
    net = parse_model(f"species X = 0; param c = {c}; reaction b: -> X @ mass_action(c);")
    counts = np.array([ssa_simulate(net, t_end, RngStream(9, i)).values[-1, 0] for i in range(runs)])
    se = counts.std(ddof=1) / math.sqrt(runs)
    assert abs(counts.mean() - c * t_end) < 3 * se


def test_schlogl_bimodal_split():
    trajs = sample_ensemble(builtin_schlogl(), SimConfig(20.0), 100, seed=1)
    final = np.array([t.at(20.0)[0] for t in trajs])
    low, high = final[final < 300], final[final >= 300]
    assert 10 <= low.size <= 90 and 10 <= high.size <= 90
    assert 50 < np.median(low) < 160
    assert 450 < np.median(high) < 650


def test_invalid_propensity_reports_reaction():
    net = ReactionNetwork([Species("X", 0)], [Reaction("bad", {}, {"X": 1}, "expr", "0.5 - X")], {})
    with pytest.raises(ModelEvaluationError, match="bad"):
        ssa_simulate(net, 10.0, RngStream(0))


# -- PDMP -----------------------------------------------------------------------


def test_pdmp_matches_closed_form():
    traj = pdmp_simulate(_decay_model(), 100.0, RngStream(0), step=1.0)
    want = 100 * (1 - math.exp(-1.0))
    assert traj.at(100.0)[0] == pytest.approx(want, rel=1e-6)
    assert traj.interpolation == "linear" and traj.times[-1] == 100.0


def test_pdmp_fourth_order():
    grid = np.arange(0, 201, 4.0)
    want = 20 * (1 - np.exp(-0.05 * grid))
    err = []
    for h in (4.0, 2.0):
        traj = pdmp_simulate(_decay_model(kd=0.05), 200.0, RngStream(0), step=h)
        got = np.array([traj.at(t)[0] for t in grid])
        err.append(np.max(np.abs(got - want)))
    ratio = err[0] / err[1]
    assert 12 < ratio < 20


def test_pdmp_constant_hazard_interjump_times():
    lam = 0.5
    traj = pdmp_simulate(_poisson_clock(lam), 20000.0, RngStream(4), step=1.0)
    g = traj["g"]
    jumps = traj.times[1:][np.diff(g) != 0]
    gaps = np.diff(np.concatenate([[0.0], jumps]))
    assert gaps.size > 9000
    se = gaps.std(ddof=1) / math.sqrt(gaps.size)
    assert abs(gaps.mean() - 1 / lam) < 3 * se
    assert sps.kstest(gaps, "expon", args=(0, 1 / lam)).pvalue > 0.001


def test_pdmp_argument_errors():
    with pytest.raises(ValueError):
        pdmp_simulate(_decay_model(), 5.0, RngStream(0), step=10.0)
    with pytest.raises(ValueError):
        pdmp_simulate(_decay_model(), 5.0, RngStream(0), step=0.0)


def test_pdmp_negative_hazard():
    model = HybridModel(
        [DiscreteVariable("g", ("a", "b"))],
        [ContinuousVariable("X", 0.0)],
        {"X": "1"},
        [Jump("j", "g==a", "1 - X", {"g": "b"})],
    )
    with pytest.raises(ModelEvaluationError):
        pdmp_simulate(model, 10.0, RngStream(0), step=0.5)


def test_repressilator_all_bound_decays():
    m = builtin_repressilator(ku=0.0)
    m = HybridModel(
        [DiscreteVariable(d.name, d.domain, "bound") for d in m.discrete],
        [ContinuousVariable(v.name, 50.0) for v in m.continuous],
        dict(m.flows),
        m.jumps,
        m.parameters,
    )
    traj = pdmp_simulate(m, 100.0, RngStream(0))
    assert traj.at(100.0)[:3] == pytest.approx(50 * math.exp(-1.0) * np.ones(3), rel=1e-6)


def test_repressilator_no_binding_saturates():
    m = builtin_repressilator(kb=0.0)
    traj = pdmp_simulate(m, 2000.0, RngStream(0))
    assert np.all(traj.values[:, 3:] == 0)
    assert traj.at(2000.0)[:3] == pytest.approx(100 * (1 - math.exp(-20)) * np.ones(3), rel=1e-6)


def test_repressilator_oscillates():
    traj = pdmp_simulate(builtin_repressilator(), 7000.0, RngStream(2))
    x = traj.values[:, :3]
    assert x.min() >= 0 and x.max() <= 100 + 1e-9
    for k in range(3):
        assert x[:, k].max() > 60 and x[traj.times > 500, k].min() < 20


# -- ensembles --------------------------------------------------------------------


def test_single_run_matches_direct_call():
    cfg = SimConfig(5.0)
    (a,) = sample_ensemble(builtin_schlogl(), cfg, 1, seed=42)
    assert a == simulate(builtin_schlogl(), cfg, RngStream(42, 0))


def test_ensemble_deterministic_and_job_independent():
    cfg = SimConfig(3.0)
    a = sample_ensemble(builtin_schlogl(), cfg, 6, seed=8)
    b = sample_ensemble(builtin_schlogl(), cfg, 6, seed=8)
    c = sample_ensemble(builtin_schlogl(), cfg, 6, seed=8, jobs=2)
    assert all(x == y == z for x, y, z in zip(a, b, c))
    assert a[0] != a[1]


def test_hybrid_ensemble_job_independent():
    cfg = SimConfig(300.0, 1.0)
    a = sample_ensemble(builtin_repressilator(), cfg, 4, seed=3)
    b = sample_ensemble(builtin_repressilator(), cfg, 4, seed=3, jobs=3)
    assert all(x == y for x, y in zip(a, b))


def test_two_seeds_statistically_consistent():
    cfg = SimConfig(20.0)
    p = []
    for seed in (100, 200):
        final = map_ensemble(builtin_schlogl(), cfg, 300, seed, _final_high)
        p.append(np.mean(final))
    pooled = np.mean(p)
    se = math.sqrt(2 * pooled * (1 - pooled) / 300)
    assert abs(p[0] - p[1]) < 3 * se


def _final_high(traj):
    return traj.at(traj.t_end)[0] >= 300


def test_failing_run_reports_index():
    net = ReactionNetwork([Species("X", 0)], [Reaction("bad", {}, {"X": 1}, "expr", "0.5 - X")], {})
    with pytest.raises(RunError) as info:
        sample_ensemble(net, SimConfig(5.0), 3, seed=0)
    assert info.value.index == 0 and "bad" in str(info.value)


def test_ensemble_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sample_ensemble(builtin_schlogl(), SimConfig(1.0), 0, seed=0)
    with pytest.raises(ValueError):
        simulate(builtin_schlogl(), SimConfig(None), RngStream(0))


def test_csv_round_trip(tmp_path):
    traj = pdmp_simulate(builtin_repressilator(), 50.0, RngStream(1))
    path = tmp_path / "run.csv"
    write_trajectory_csv(traj, path, seed=1, model=builtin_repressilator(), index=0)
    assert path.read_text().splitlines()[0] == "t,X1,X2,X3,g1,g2,g3"
    assert read_trajectory_csv(path) == traj
