"""Covariance kernels on scalar time inputs, composable by + and *.

With d = t - t' and per-kernel variance v, lengthscale l, weighting a:

    constant    k = v
    white       k = v * delta(t, t')        delta = 1 iff t == t' exactly
    linear      k = v * t * t'              (non-stationary)
    se          k = v * exp(-d^2 / (2 l^2))
    rq          k = v * (1 + d^2 / (2 a l^2))^(-a)
    matern12    k = v * exp(-|d| / l)
    matern32    k = v * (1 + s) * exp(-s)            with s = sqrt(3) |d| / l
    matern52    k = v * (1 + s + s^2/3) * exp(-s)    with s = sqrt(5) |d| / l

Sums add kernel values elementwise, products multiply them. Expression
trees are immutable; parameter updates return new trees. Trainable
parameters are flattened depth-first, left-to-right, with dotted paths
such as "sum.left.matern32.lengthscale".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BoundViolation, EmptyInput, UnknownPath

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)

DEFAULT_LOWER_BOUND = 1e-6


@dataclass(frozen=True)
class Param:
    """Scalar hyperparameter with a trainable flag and optional lower bound."""

    value: float
    trainable: bool = True
    lower_bound: float | None = DEFAULT_LOWER_BOUND

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.lower_bound is not None and self.value < self.lower_bound:
            raise BoundViolation(
                f"value {self.value!r} below lower bound {self.lower_bound!r}"
            )


def _as_param(v) -> Param:
    return v if isinstance(v, Param) else Param(v)


def _as_times(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise EmptyInput("time vector is empty")
    return X


class Kernel:
    """Base class: evaluation, covariance matrices, analytic gradients."""

    name: str = "kernel"

    def __add__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        return Sum(self, other)

    def __mul__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        return Product(self, other)

    def __call__(self, t: float, t2: float) -> float:
        """Scalar kernel value k(t, t2)."""
        return float(self._eval(np.float64(t), np.float64(t2)))

    def matrix(self, X, X2=None) -> np.ndarray:
        """Covariance matrix with entries k(X[i], X2[j]); X2 defaults to X."""
        X = _as_times(X)
        X2 = X if X2 is None else _as_times(X2)
        return self._eval(X[:, None], X2[None, :])

    def diag(self, X) -> np.ndarray:
        """Vector of k(X[i], X[i]) without forming the full matrix."""
        X = _as_times(X)
        return self._eval(X, X)

    def params(self) -> list[tuple[str, Param]]:
        """All hyperparameters as (path, Param), depth-first left-to-right."""
        return list(self._walk_params(""))

    def gradients(self, X) -> list[np.ndarray]:
        """One matrix dK/d(theta) per trainable parameter, in params() order."""
        X = _as_times(X)
        return [g for _, g in self._grad_items(X[:, None], X[None, :], "")]

    def with_param(self, path: str, *, value=None, trainable=None) -> "Kernel":
        """New tree with one parameter's value and/or trainable flag replaced."""
        raise NotImplementedError

    # subclasses implement _eval, _walk_params, _grad_items
    def _eval(self, T, T2):
        raise NotImplementedError


class _Leaf(Kernel):
    """Kernel leaf with named Param fields."""

    _keys: tuple[str, ...] = ()

    def _items(self) -> list[tuple[str, Param]]:
        return [(k, getattr(self, k)) for k in self._keys]

    def _walk_params(self, prefix):
        for key, p in self._items():
            yield f"{prefix}{self.name}.{key}", p

    def _grad_items(self, T, T2, prefix):
        partials = self._partials(T, T2)
        return [
            (f"{prefix}{self.name}.{key}", g)
            for (key, p), g in zip(self._items(), partials)
            if p.trainable
        ]

    def with_param(self, path, *, value=None, trainable=None):
        for key, p in self._items():
            if path == f"{self.name}.{key}":
                new = Param(
                    p.value if value is None else value,
                    p.trainable if trainable is None else trainable,
                    p.lower_bound,
                )
                return replace(self, **{key: new})
        raise UnknownPath(path)

    def _partials(self, T, T2) -> list[np.ndarray]:
        """dK/d(param) for every parameter, trainable or not, in _keys order."""
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(_Leaf):
    """Constant covariance: draws are horizontal lines at a random level."""

    variance: Param = None

    name = "constant"
    _keys = ("variance",)

    def __post_init__(self):
        object.__setattr__(self, "variance", _as_param(1.0 if self.variance is None else self.variance))

    def _eval(self, T, T2):
        return np.full(np.broadcast_shapes(np.shape(T), np.shape(T2)), self.variance.value)

    def _partials(self, T, T2):
        return [np.ones(np.broadcast_shapes(np.shape(T), np.shape(T2)))]


@dataclass(frozen=True)
class White(_Leaf):
    """Uncorrelated noise; nonzero only at exactly equal times."""

    variance: Param = None

    name = "white"
    _keys = ("variance",)

    def __post_init__(self):
        object.__setattr__(self, "variance", _as_param(1.0 if self.variance is None else self.variance))

    def _eval(self, T, T2):
        return np.where(np.equal(T, T2), self.variance.value, 0.0)

    def _partials(self, T, T2):
        return [np.where(np.equal(T, T2), 1.0, 0.0)]


@dataclass(frozen=True)
class Linear(_Leaf):
    """Dot-product kernel, k = v * t * t'; depends on absolute time."""

    variance: Param = None

    name = "linear"
    _keys = ("variance",)

    def __post_init__(self):
        object.__setattr__(self, "variance", _as_param(1.0 if self.variance is None else self.variance))

    def _eval(self, T, T2):
        return self.variance.value * np.multiply(T, T2)

    def _partials(self, T, T2):
        return [np.multiply(T, T2)]


@dataclass(frozen=True)
class SquaredExponential(_Leaf):
    """Smooth stationary kernel, k = v * exp(-d^2 / (2 l^2))."""

    variance: Param = None
    lengthscale: Param = None

    name = "se"
    _keys = ("variance", "lengthscale")

    def __post_init__(self):
        object.__setattr__(self, "variance", _as_param(1.0 if self.variance is None else self.variance))
        object.__setattr__(self, "lengthscale", _as_param(1.0 if self.lengthscale is None else self.lengthscale))

    def _eval(self, T, T2):
        d = np.subtract(T, T2)
        l = self.lengthscale.value
        return self.variance.value * np.exp(-(d * d) / (2.0 * l * l))

    def _partials(self, T, T2):
        d = np.subtract(T, T2)
        v, l = self.variance.value, self.lengthscale.value
        E = np.exp(-(d * d) / (2.0 * l * l))
        return [E, v * E * (d * d) / l**3]


@dataclass(frozen=True)
class RationalQuadratic(_Leaf):
    """Scale mixture of SE kernels, k = v * (1 + d^2/(2 a l^2))^(-a).

    Converges to the SE kernel as the weighting parameter a grows.
    """

    variance: Param = None
    lengthscale: Param = None
    alpha: Param = None

    name = "rq"
    _keys = ("variance", "lengthscale", "alpha")

    def __post_init__(self):
        object.__setattr__(self, "variance", _as_param(1.0 if self.variance is None else self.variance))
        object.__setattr__(self, "lengthscale", _as_param(1.0 if self.lengthscale is None else self.lengthscale))
        object.__setattr__(self, "alpha", _as_param(1.0 if self.alpha is None else self.alpha))

    def _eval(self, T, T2):
        d = np.subtract(T, T2)
        v, l, a = self.variance.value, self.lengthscale.value, self.alpha.value
        u = (d * d) / (2.0 * a * l * l)
        return v * (1.0 + u) ** (-a)

    def _partials(self, T, T2):
        d = np.subtract(T, T2)
        v, l, a = self.variance.value, self.lengthscale.value, self.alpha.value
        u = (d * d) / (2.0 * a * l * l)
        base = (1.0 + u) ** (-a)
        d_var = base
        d_len = v * (1.0 + u) ** (-a - 1.0) * (d * d) / l**3
        d_alpha = v * base * (u / (1.0 + u) - np.log1p(u))
        return [d_var, d_len, d_alpha]


@dataclass(frozen=True)
class Matern(_Leaf):
    """Matern kernel at half-integer smoothness; order is 12, 32, or 52."""

    order: int = 32
    variance: Param = None
    lengthscale: Param = None

    _keys = ("variance", "lengthscale")

    def __post_init__(self):
        if self.order not in (12, 32, 52):
            raise ValueError(f"matern order must be 12, 32 or 52, got {self.order}")
        object.__setattr__(self, "variance", _as_param(1.0 if self.variance is None else self.variance))
        object.__setattr__(self, "lengthscale", _as_param(1.0 if self.lengthscale is None else self.lengthscale))

    @property
    def name(self):
        return f"matern{self.order}"

    def _eval(self, T, T2):
        r = np.abs(np.subtract(T, T2))
        v, l = self.variance.value, self.lengthscale.value
        if self.order == 12:
            return v * np.exp(-r / l)
        if self.order == 32:
            s = SQRT3 * r / l
            return v * (1.0 + s) * np.exp(-s)
        s = SQRT5 * r / l
        return v * (1.0 + s + s * s / 3.0) * np.exp(-s)

    def _partials(self, T, T2):
        r = np.abs(np.subtract(T, T2))
        v, l = self.variance.value, self.lengthscale.value
        if self.order == 12:
            E = np.exp(-r / l)
            return [E, v * E * r / l**2]
        if self.order == 32:
            s = SQRT3 * r / l
            E = np.exp(-s)
            return [(1.0 + s) * E, v * s * s * E / l]
        s = SQRT5 * r / l
        E = np.exp(-s)
        return [(1.0 + s + s * s / 3.0) * E, v * (s * s * (1.0 + s) / 3.0) * E / l]


@dataclass(frozen=True)
class Sum(Kernel):
    """Elementwise sum of two kernels."""

    left: Kernel
    right: Kernel

    name = "sum"

    def _eval(self, T, T2):
        return self.left._eval(T, T2) + self.right._eval(T, T2)

    def _walk_params(self, prefix):
        yield from self.left._walk_params(prefix + "sum.left.")
        yield from self.right._walk_params(prefix + "sum.right.")

    def _grad_items(self, T, T2, prefix):
        return self.left._grad_items(T, T2, prefix + "sum.left.") + self.right._grad_items(
            T, T2, prefix + "sum.right."
        )

    def with_param(self, path, *, value=None, trainable=None):
        if path.startswith("sum.left."):
            return replace(self, left=self.left.with_param(path[len("sum.left."):], value=value, trainable=trainable))
        if path.startswith("sum.right."):
            return replace(self, right=self.right.with_param(path[len("sum.right."):], value=value, trainable=trainable))
        raise UnknownPath(path)


@dataclass(frozen=True)
class Product(Kernel):
    """Elementwise product of two kernels."""

    left: Kernel
    right: Kernel

    name = "product"

    def _eval(self, T, T2):
        return self.left._eval(T, T2) * self.right._eval(T, T2)

    def _walk_params(self, prefix):
        yield from self.left._walk_params(prefix + "product.left.")
        yield from self.right._walk_params(prefix + "product.right.")

    def _grad_items(self, T, T2, prefix):
        kl = self.left._eval(T, T2)
        kr = self.right._eval(T, T2)
        out = [(p, g * kr) for p, g in self.left._grad_items(T, T2, prefix + "product.left.")]
        out += [(p, kl * g) for p, g in self.right._grad_items(T, T2, prefix + "product.right.")]
        return out

    def with_param(self, path, *, value=None, trainable=None):
        if path.startswith("product.left."):
            return replace(self, left=self.left.with_param(path[len("product.left."):], value=value, trainable=trainable))
        if path.startswith("product.right."):
            return replace(self, right=self.right.with_param(path[len("product.right."):], value=value, trainable=trainable))
        raise UnknownPath(path)
