"""Gaussian-process regression with an RBF kernel and per-point noise.

Targets are centred by their sample mean and modelled with a zero-mean
prior; the mean is added back at prediction.  Hyperparameters are fixed by
the caller (no marginal-likelihood fitting).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .errors import NumericalError

__all__ = ["KernelConfig", "GpPosterior", "rbf_kernel", "kernel_matrix", "fit", "predict"]

JITTER = 1e-8


@dataclass(frozen=True)
class KernelConfig:
    """``amplitude`` is the signal variance; ``lengthscale`` acts on standardized inputs."""

    amplitude: float
    lengthscale: float = 0.5

    def __post_init__(self):
        if not (self.amplitude > 0 and np.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not (self.lengthscale > 0 and np.isfinite(self.lengthscale)):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")


def kernel_matrix(xa, xb, config):
    """Gram block ``K[i, j] = A exp(-|xa_i - xb_j|^2 / (2 l^2))``."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    if xa.shape[1] != xb.shape[1]:
        raise ValueError(f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    d2 = (
        np.sum(xa * xa, axis=1)[:, None]
        + np.sum(xb * xb, axis=1)[None, :]
        - 2.0 * xa @ xb.T
    )
    np.maximum(d2, 0.0, out=d2)
    return config.amplitude * np.exp(-d2 / (2.0 * config.lengthscale**2))


def rbf_kernel(x, y, config):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d2 = float(np.sum((x - y) ** 2))
    return config.amplitude * np.exp(-d2 / (2.0 * config.lengthscale**2))


@dataclass(frozen=True, eq=False)
class GpPosterior:
    inputs: np.ndarray
    targets: np.ndarray
    noise: np.ndarray
    kernel: KernelConfig
    offset: float
    chol: tuple | None
    weights: np.ndarray

    @property
    def dim(self):
        return self.inputs.shape[1]

    @property
    def n(self):
        return self.inputs.shape[0]

    def predict(self, query):
        return predict(self, query)


def _check_duplicates(x, y, noise):
    """Identical noiseless inputs with different targets make the Gram matrix singular."""
    quiet = np.flatnonzero(noise == 0)
    if quiet.size < 2:
        return
    _, first, inverse = np.unique(x[quiet], axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    for k, i in enumerate(quiet):
        j = quiet[first[inverse[k]]]
        if j != i and y[i] != y[j]:
            raise NumericalError(
                f"Gram matrix is singular: inputs {j} and {i} coincide with zero noise "
                f"but have targets {float(y[j])!r} and {float(y[i])!r}"
            )


def fit(inputs, targets, noise, kernel):
    """Posterior of a zero-mean GP on mean-centred ``targets``.

    ``noise`` is a scalar or one variance per point.  A jitter of
    ``1e-8 * amplitude`` is added to the diagonal.  An empty training set
    yields the prior.
    """
    y = np.asarray(targets, dtype=float).ravel()
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x.reshape(y.size, -1) if y.size else x.reshape(0, 1)
    if x.shape[0] != y.size:
        raise ValueError(f"{x.shape[0]} inputs but {y.size} targets")
    noise = np.broadcast_to(np.asarray(noise, dtype=float), y.shape).copy()
    if np.any(noise < 0) or not np.all(np.isfinite(noise)):
        raise ValueError("noise variances must be finite and non-negative")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("inputs and targets must be finite")
    if y.size == 0:
        return GpPosterior(x, y, noise, kernel, 0.0, None, np.zeros(0))
    _check_duplicates(x, y, noise)
    offset = float(np.mean(y))
    gram = kernel_matrix(x, x, kernel)
    gram[np.diag_indices_from(gram)] += noise + JITTER * kernel.amplitude
    try:
        chol = cho_factor(gram, lower=True, check_finite=False)
    except LinAlgError:
        raise NumericalError(
            f"Gram matrix not positive definite (condition number ~{np.linalg.cond(gram):.3g})"
        ) from None
    weights = cho_solve(chol, y - offset, check_finite=False)
    return GpPosterior(x, y, noise, kernel, offset, chol, weights)


def predict(gp, query):
    """Posterior ``(mean, variance)``; a 2-D ``query`` gives arrays, one row per point."""
    q = np.asarray(query, dtype=float)
    single = q.ndim <= 1
    q = np.atleast_2d(q)
    if single and q.shape[1] != gp.dim and q.size == gp.dim:
        q = q.reshape(1, gp.dim)
    if q.shape[1] != gp.dim:
        raise ValueError(f"query dimension {q.shape[1]} does not match training dimension {gp.dim}")
    amp = gp.kernel.amplitude
    if gp.n == 0:
        mean = np.zeros(q.shape[0])
        var = np.full(q.shape[0], amp)
    else:
        ks = kernel_matrix(gp.inputs, q, gp.kernel)
        mean = gp.offset + ks.T @ gp.weights
        v = solve_triangular(gp.chol[0], ks, lower=True, check_finite=False)
        var = amp - np.sum(v * v, axis=0)
        if np.any(var < -1e-8 * amp):
            warnings.warn(f"negative posterior variance {var.min():.3g} clamped to 0", RuntimeWarning, stacklevel=2)
        var = np.maximum(var, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
