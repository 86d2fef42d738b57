"""Shared fixtures and random-model builders for the test suite."""

import numpy as np
import pytest

from gptraj import kernels, means
from gptraj.gpr import GPModel
from gptraj.kernels import Param
from gptraj.trajectory import CoordinateDataset

# the worked-example training set used throughout
DEMO_X = np.arange(11.0, 21.0)
DEMO_Y = np.array([1, 10, 30, 45, 40, 40, 50, 40, 35, 50], dtype=float)


@pytest.fixture
def demo_dataset() -> CoordinateDataset:
    return CoordinateDataset(X=DEMO_X, y=DEMO_Y)


def random_leaf(rng: np.random.Generator, trainable_bias: float = 0.8) -> kernels.Kernel:
    def param(lo=0.3, hi=3.0):
        return Param(float(rng.uniform(lo, hi)), bool(rng.random() < trainable_bias))

    choice = rng.integers(0, 8)
    if choice == 0:
        return kernels.Constant(param())
    if choice == 1:
        return kernels.White(param())
    if choice == 2:
        return kernels.Linear(param(0.1, 1.0))
    if choice == 3:
        return kernels.SquaredExponential(param(), param(0.5, 4.0))
    if choice == 4:
        return kernels.RationalQuadratic(param(), param(0.5, 4.0), param(0.5, 2.0))
    order = (12, 32, 52)[int(rng.integers(0, 3))]
    return kernels.Matern(order=order, variance=param(), lengthscale=param(0.5, 4.0))


def random_kernel_tree(rng: np.random.Generator, depth: int = 3) -> kernels.Kernel:
    if depth <= 0 or rng.random() < 0.45:
        return random_leaf(rng)
    combine = kernels.Sum if rng.random() < 0.6 else kernels.Product
    return combine(random_kernel_tree(rng, depth - 1), random_kernel_tree(rng, depth - 1))


def random_mean(rng: np.random.Generator) -> means.MeanFunction:
    choice = rng.integers(0, 3)
    if choice == 0:
        return means.Zero()
    if choice == 1:
        return means.Constant(Param(float(rng.normal(0, 2)), bool(rng.random() < 0.8), None))
    return means.Linear(
        A=Param(float(rng.normal(0, 1)), bool(rng.random() < 0.8), None),
        b=Param(float(rng.normal(0, 2)), bool(rng.random() < 0.8), None),
    )


def random_times(rng: np.random.Generator, n_max: int = 8) -> np.ndarray:
    n = int(rng.integers(2, n_max + 1))
    gaps = rng.uniform(0.2, 2.0, n)
    return np.cumsum(gaps) + rng.uniform(-2.0, 2.0)


def random_model(rng: np.random.Generator, n_max: int = 8) -> GPModel:
    X = random_times(rng, n_max)
    y = rng.normal(0.0, 3.0, X.size)
    # likelihood floor of 0.05 keeps C well conditioned so the jitter ladder
    # never fires mid-finite-difference
    lik = Param(float(rng.uniform(0.05, 1.5)), bool(rng.random() < 0.8))
    return GPModel(
        kernel=random_kernel_tree(rng, 3),
        mean=random_mean(rng),
        likelihood=lik,
        X=X,
        y=y,
    )
