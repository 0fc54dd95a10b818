import math

import numpy as np
import pytest
from scipy import stats as sps

from stochrobust.builtins import builtin_schlogl
from stochrobust.model import ReactionNetwork, Species, parse_model
from stochrobust.sim import SimConfig
from stochrobust.stats import (
    correlation,
    estimate,
    estimate_many,
    histogram,
    probability_ci,
    robustness_samples,
    summarize,
)
from stochrobust.stl import parse_formula


def test_wilson_boundaries():
    assert probability_ci(0, 50)[0] == 0.0
    assert probability_ci(50, 50)[1] == 1.0
    lo, hi = probability_ci(4583, 10000)
    assert (hi - lo) / 2 == pytest.approx(0.0098, abs=2e-4)
    assert lo < 0.4583 < hi


def test_wilson_matches_closed_form():
    z = 1.959963984540054
    for k, n in [(3, 10), (40, 41), (500, 1000)]:
        p = k / n
        c = (p + z * z / (2 * n)) / (1 + z * z / n)
        h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        assert probability_ci(k, n) == pytest.approx((c - h, c + h), abs=1e-12)


@pytest.mark.parametrize("args", [(5, 4), (-1, 4), (0, 0), (1, 2, 1.0), (1, 2, 0.0)])
def test_probability_ci_rejects(args):
    with pytest.raises(ValueError):
        probability_ci(*args)


def test_histogram_examples():
    h = histogram([2.0, 2.0, 2.0], bins=5)
    assert np.count_nonzero(h.counts) == 1 and h.counts.sum() == 3
    h = histogram([-1.0, 1.0], bins=2, range=(-1, 1))
    assert h.counts.tolist() == [1, 1]
    with pytest.raises(ValueError):
        histogram([], 3)
    with pytest.raises(ValueError):
        histogram([1.0], 0)


def test_histogram_normal_chi_square():
    x = np.random.default_rng(0).standard_normal(10000)
    h = histogram(x, 50)
    expected = np.diff(sps.norm.cdf(h.edges)) * x.size
    keep = expected >= 5
    obs, exp = h.counts[keep], expected[keep]
    exp = exp * obs.sum() / exp.sum()
    assert sps.chisquare(obs, exp).pvalue > 0.01


def test_correlation():
    xs = np.arange(10.0)
    assert correlation(xs, 2 * xs) == pytest.approx(1.0)
    assert correlation(xs, -xs) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        correlation(xs, np.ones(10))
    with pytest.raises(ValueError):
        correlation([1.0], [2.0])


def test_summary_indicators():
    s = summarize([3.0, -1.0, 0.0, 5.0, -3.0])
    assert s.n == 5 and s.zero_count == 1
    assert s.p_hat == 0.4
    assert s.cond_pos == 4.0 and s.cond_neg == -2.0
    assert s.mean_rob == pytest.approx(0.8)
    assert s.histogram.counts.sum() == 5
    assert s.mean_ci[0] < s.mean_rob < s.mean_ci[1]


def test_summary_undefined_conditionals():
    s = summarize([1.0, 2.0])
    assert s.cond_neg is None and s.p_hat == 1.0
    s = summarize([-1.0, -2.0])
    assert s.cond_pos is None and s.p_hat == 0.0


def test_decomposition_identity_random():
    rng = np.random.default_rng(3)
    for _ in range(500):
        r = rng.normal(rng.normal(0, 100), rng.uniform(1, 300), int(rng.integers(2, 3000)))
        s = summarize(r)
        assert s.zero_count == 0
        assert s.decomposition_error() <= 1e-12


def test_summary_is_order_invariant():
    r = np.random.default_rng(4).normal(-50, 200, 1001)
    a = summarize(r)
    b = summarize(r[np.random.default_rng(5).permutation(r.size)])
    for name in ("p_hat", "p_ci", "mean_rob", "mean_ci", "cond_pos", "cond_neg", "zero_count"):
        assert getattr(a, name) == getattr(b, name)
    assert np.array_equal(a.histogram.counts, b.histogram.counts)


def test_ci_shrinks_with_sqrt_n():
    rng = np.random.default_rng(6)
    ratios = []
    for _ in range(200):
        a = summarize(rng.normal(0, 1, 2000))
        b = summarize(rng.normal(0, 1, 4000))
        ratios.append((a.mean_ci[1] - a.mean_ci[0]) / (b.mean_ci[1] - b.mean_ci[0]))
    ratios = np.array(ratios)
    se = ratios.std(ddof=1) / math.sqrt(ratios.size)
    assert abs(ratios.mean() - math.sqrt(2)) < 3 * se + 1e-3


def test_summarize_rejects():
    with pytest.raises(ValueError):
        summarize([1.0])
    with pytest.raises(ValueError):
        summarize([1.0, float("nan")])


def test_deterministic_model_estimate():
    net = ReactionNetwork([Species("X", 310)], [], {})
    s = estimate(net, parse_formula("X >= 300"), 4, seed=0, config=SimConfig(1.0))
    assert s.p_hat == 1.0 and s.mean_rob == 10.0 and s.cond_neg is None
    assert s.histogram.counts.sum() == 4 and np.count_nonzero(s.histogram.counts) == 1


def test_estimate_requires_two_runs():
    net = ReactionNetwork([Species("X", 310)], [], {})
    with pytest.raises(ValueError):
        estimate(net, parse_formula("X >= 300"), 1, seed=0, config=SimConfig(1.0))


def test_estimate_is_deterministic_and_job_independent():
    net = builtin_schlogl()
    phi = parse_formula("F[0,2] G[0,3] (X >= 300)")
    a = estimate(net, phi, 8, seed=3)
    b = estimate(net, phi, 8, seed=3, jobs=2)
    assert a == b
    assert np.array_equal(a.samples, b.samples)


def test_estimate_many_shares_trajectories():
    net = parse_model("species X = 0; param c = 2; reaction b: -> X @ mass_action(c);")
    formulas = [parse_formula(f"F[0,5] X >= {k}") for k in (3, 7)]
    rows = robustness_samples(net, formulas, 20, seed=1)
    # the maximum of X over [0,5] is the same in both columns
    assert np.array_equal(rows[:, 0] - rows[:, 1], np.full(20, 4.0))
    many = estimate_many(net, formulas, 20, seed=1)
    assert [m.mean_rob for m in many] == [pytest.approx(rows[:, 0].mean()), pytest.approx(rows[:, 1].mean())]


def test_summary_json_shape():
    d = summarize([1.0, -2.0, 3.0]).to_dict(seed=1, formula="X >= 0")
    assert set(d) == {"n", "p_hat", "p_ci", "mean_rob", "mean_ci", "cond_pos", "cond_neg", "zero_count",
                      "histogram", "seed", "formula"}
    assert sum(d["histogram"]["counts"]) == 3
