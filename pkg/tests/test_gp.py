import math
import warnings

import numpy as np
import pytest

from oracles import gp_dense
from stochrobust.errors import NumericalError
from stochrobust.gp import KernelConfig, fit, kernel_matrix, predict, rbf_kernel


def test_kernel_values():
    cfg = KernelConfig(1.0, 0.5)
    assert rbf_kernel([0.3, 0.1], [0.3, 0.1], cfg) == 1.0
    assert rbf_kernel([0.0], [0.5], cfg) == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert rbf_kernel([0.0], [100.0], cfg) == 0.0
    assert rbf_kernel([0.0], [0.0], KernelConfig(3.0)) == 3.0
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [0.0, 1.0], cfg)
    with pytest.raises(ValueError):
        kernel_matrix(np.zeros((2, 1)), np.zeros((2, 2)), cfg)


def test_kernel_matrix_matches_pointwise():
    rng = np.random.default_rng(0)
    cfg = KernelConfig(2.5, 0.7)
    a, b = rng.uniform(-1, 1, (6, 3)), rng.uniform(-1, 1, (4, 3))
    k = kernel_matrix(a, b, cfg)
    for i in range(6):
        for j in range(4):
            assert k[i, j] == pytest.approx(rbf_kernel(a[i], b[j], cfg), rel=1e-12)


@pytest.mark.parametrize("amplitude, lengthscale", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (float("inf"), 1.0)])
def test_kernel_config_validation(amplitude, lengthscale):
    with pytest.raises(ValueError):
        KernelConfig(amplitude, lengthscale)


def test_empty_training_set_is_prior():
    gp = fit(np.zeros((0, 2)), [], 1.0, KernelConfig(4.0))
    assert predict(gp, [0.1, 0.2]) == (0.0, 4.0)


def test_single_noiseless_point_interpolates():
    gp = fit([[0.2]], [7.5], 0.0, KernelConfig(1.0))
    mean, var = predict(gp, [0.2])
    assert mean == 7.5 and var == pytest.approx(0.0, abs=1e-7)


def test_duplicate_noiseless_inputs_conflict():
    with pytest.raises(NumericalError, match="singular"):
        fit([[0.1], [0.1]], [1.0, 2.0], 0.0, KernelConfig(1.0))
    # consistent duplicates and noisy duplicates are fine
    fit([[0.1], [0.1]], [1.0, 1.0], 0.0, KernelConfig(1.0))
    fit([[0.1], [0.1]], [1.0, 2.0], 0.1, KernelConfig(1.0))


def test_three_points_against_dense_oracle():
    x = np.array([[-0.5], [0.0], [0.7]])
    y = np.array([1.0, -2.0, 0.5])
    noise = np.array([0.01, 0.2, 0.0])
    gp = fit(x, y, noise, KernelConfig(1.3, 0.5))
    xq = np.linspace(-1, 1, 9)[:, None]
    mean, var = predict(gp, xq)
    m_ref, v_ref = gp_dense(x, y, noise, 1.3, 0.5, xq)
    assert np.allclose(mean, m_ref, atol=1e-8, rtol=0)
    assert np.allclose(var, v_ref, atol=1e-8, rtol=0)


def test_random_instances_against_dense_oracle():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 21))
        d = int(rng.integers(1, 4))
        amp = float(rng.uniform(0.5, 5.0))
        ell = float(rng.uniform(0.3, 1.0))
        x = rng.uniform(-1, 1, (n, d))
        y = rng.normal(0, 3, n)
        noise = rng.uniform(0.01, 1.0, n) if rng.random() < 0.5 else float(rng.uniform(0.01, 1.0))
        xq = rng.uniform(-1, 1, (15, d))
        mean, var = predict(fit(x, y, noise, KernelConfig(amp, ell)), xq)
        m_ref, v_ref = gp_dense(x, y, noise, amp, ell, xq)
        assert np.allclose(mean, m_ref, atol=1e-8, rtol=1e-8)
        assert np.allclose(var, v_ref, atol=1e-8, rtol=1e-8)


def test_batch_equals_pointwise():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, (10, 2))
    gp = fit(x, rng.normal(size=10), 0.05, KernelConfig(2.0))
    grid = rng.uniform(-1, 1, (200, 2))
    mean, var = predict(gp, grid)
    for i in range(200):
        m, v = predict(gp, grid[i])
        assert abs(m - mean[i]) <= 1e-12 and abs(v - var[i]) <= 1e-12


def test_far_from_data_reverts_to_prior():
    gp = fit([[0.0], [0.1]], [3.0, 5.0], 0.0, KernelConfig(2.0, 0.5))
    mean, var = predict(gp, [50.0])
    assert mean == pytest.approx(4.0) and var == pytest.approx(2.0)


def test_variance_bounded_and_monotone_under_new_data():
    rng = np.random.default_rng(3)
    cfg = KernelConfig(1.7, 0.5)
    for _ in range(50):
        x = rng.uniform(-1, 1, (12, 1))
        y = rng.normal(size=12)
        grid = np.linspace(-1.2, 1.2, 61)[:, None]
        prev = np.full(61, cfg.amplitude)
        for n in range(1, 13):
            _, var = predict(fit(x[:n], y[:n], 0.0, cfg), grid)
            assert np.all(var <= cfg.amplitude + 1e-8)
            assert np.all(var <= prev + 1e-8)
            prev = var


def test_dimension_mismatch():
    gp = fit(np.zeros((2, 2)) + [[0, 0], [1, 1]], [1.0, 2.0], 0.1, KernelConfig(1.0))
    with pytest.raises(ValueError):
        predict(gp, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        fit(np.zeros((3, 1)), [1.0, 2.0], 0.1, KernelConfig(1.0))


def test_invalid_noise_rejected():
    with pytest.raises(ValueError):
        fit([[0.0]], [1.0], -1.0, KernelConfig(1.0))


def test_no_spurious_variance_warnings():
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, (30, 1))
    gp = fit(x, rng.normal(size=30), 0.0, KernelConfig(1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _, var = predict(gp, x)
    assert np.all(var >= 0)
