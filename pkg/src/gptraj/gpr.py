"""Exact Gaussian-process regression.

A GPModel bundles a kernel, a mean function, the Gaussian likelihood
variance, and its training set. With r = y - m(X) and
C = K(X, X) + sigma_lik^2 I + diag(extra_noise), the negative log marginal
likelihood is

    nlml = 1/2 r^T C^{-1} r + 1/2 ln|C| + n/2 ln(2 pi)

and posterior prediction at new times X* is

    mean = m(X*) + K*^T C^{-1} r
    var  = k(t*, t*) - k*^T C^{-1} k*        (latent f)
    var_y = var + sigma_lik^2                (observed y)

All operations are pure; models are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import linalg
from .errors import DimensionMismatch, NumericalBreakdown
from .kernels import Kernel, Param, _as_times
from .means import MeanFunction

# base jitter handed to the Cholesky ladder everywhere in this module
CHOL_JITTER = 1e-6

LATENT_F = "latent_f"
OBSERVED_Y = "observed_y"


@dataclass(frozen=True)
class GPModel:
    kernel: Kernel
    mean: MeanFunction
    likelihood: Param
    X: np.ndarray
    y: np.ndarray
    extra_noise_diag: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 1 or y.ndim != 1 or X.shape != y.shape or X.size < 1:
            raise DimensionMismatch(f"X {X.shape} and y {y.shape} must be equal-length 1-d, n >= 1")
        if X.size > 1 and not np.all(np.diff(X) > 0):
            raise ValueError("training times must be strictly increasing")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not isinstance(self.likelihood, Param):
            object.__setattr__(self, "likelihood", Param(self.likelihood))
        if self.extra_noise_diag is not None:
            extra = np.asarray(self.extra_noise_diag, dtype=float)
            if extra.shape != X.shape:
                raise DimensionMismatch("extra_noise_diag length must match X")
            if np.any(extra < 0):
                raise ValueError("extra_noise_diag entries must be nonnegative")
            object.__setattr__(self, "extra_noise_diag", extra)

    @property
    def n(self) -> int:
        return self.X.size


@dataclass(frozen=True)
class PredictionSet:
    times: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    kind: str


def _noisy_cov(model: GPModel) -> np.ndarray:
    C = model.kernel.matrix(model.X)
    idx = np.arange(model.n)
    C[idx, idx] += model.likelihood.value
    if model.extra_noise_diag is not None:
        C[idx, idx] += model.extra_noise_diag
    return C


def _posterior_state(model: GPModel):
    """Cholesky factor of C, residual y - m(X), and alpha = C^{-1} residual."""
    factor = linalg.cholesky_with_jitter(_noisy_cov(model), CHOL_JITTER)
    resid = model.y - model.mean.vector(model.X)
    alpha = linalg.solve_psd(factor, resid)
    return factor, resid, alpha


def nlml(model: GPModel) -> float:
    """Negative log marginal likelihood of the training data."""
    factor, resid, _ = _posterior_state(model)
    return float(
        0.5 * linalg.quadratic_form(factor, resid)
        + 0.5 * linalg.log_det_from_chol(factor)
        + 0.5 * model.n * math.log(2.0 * math.pi)
    )


def nlml_grad(model: GPModel) -> np.ndarray:
    """Gradient of nlml per trainable parameter.

    Order: kernel parameters in flatten order, then likelihood variance if
    trainable, then mean parameters. Uses the trace identity
    d nlml/d theta = 1/2 tr((C^{-1} - alpha alpha^T) dC/d theta) for
    covariance parameters and -alpha^T dm/d theta for mean parameters.
    """
    factor, resid, alpha = _posterior_state(model)
    L = factor.lower
    Linv = scipy.linalg.solve_triangular(L, np.eye(model.n), lower=True)
    Cinv = Linv.T @ Linv
    A = Cinv - np.outer(alpha, alpha)

    cov_grads = model.kernel.gradients(model.X)
    if model.likelihood.trainable:
        cov_grads.append(np.eye(model.n))
    out = [0.5 * np.sum(A * G) for G in cov_grads]
    out.extend(-(dm @ alpha) for dm in model.mean.gradients(model.X))
    return np.asarray(out)


def predict_f(model: GPModel, Xs) -> PredictionSet:
    """Posterior mean and variance of the latent function at times Xs.

    Negative variances from rounding are clamped at zero; a clamp larger
    than 1e-8 of the prior variance raises NumericalBreakdown.
    """
    Xs = _as_times(Xs)
    factor, _, alpha = _posterior_state(model)
    Ks = model.kernel.matrix(model.X, Xs)
    mu = model.mean.vector(Xs) + Ks.T @ alpha
    V = scipy.linalg.solve_triangular(factor.lower, Ks, lower=True)
    prior = model.kernel.diag(Xs)
    var = prior - np.einsum("ij,ij->j", V, V)
    if np.any(var < -(1e-8 * prior + 1e-12)):
        worst = float(np.min(var))
        raise NumericalBreakdown(f"posterior variance clamp too large: {worst:g}")
    return PredictionSet(times=Xs, means=mu, variances=np.maximum(var, 0.0), kind=LATENT_F)


def predict_y(model: GPModel, Xs) -> PredictionSet:
    """Posterior prediction of observed values: latent f plus likelihood noise."""
    latent = predict_f(model, Xs)
    return replace(latent, variances=latent.variances + model.likelihood.value, kind=OBSERVED_Y)


def sample_prior(kernel: Kernel, mean: MeanFunction, X, n_samples: int, seed: int) -> np.ndarray:
    """Draw functions from the GP prior at times X; one row per draw.

    Deterministic per seed: draws use numpy's PCG64 generator, and each
    sample is m(X) + L z with z standard normal.
    """
    X = _as_times(X)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    factor = linalg.cholesky_with_jitter(kernel.matrix(X), CHOL_JITTER)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(n_samples), X.size))
    return mean.vector(X)[None, :] + z @ factor.lower.T
