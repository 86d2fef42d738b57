"""Deterministic mean functions: zero, constant level, linear trend.

Parameters are unconstrained reals (intercepts may be negative), so they
carry no lower bound. Values are immutable; with_param returns new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import UnknownPath
from .kernels import Param, _as_times


def _as_free_param(v) -> Param:
    return v if isinstance(v, Param) else Param(v, trainable=True, lower_bound=None)


class MeanFunction:
    name: str = "mean"

    def vector(self, X) -> np.ndarray:
        """Evaluate m(t) at each time in X."""
        raise NotImplementedError

    def gradients(self, X) -> list[np.ndarray]:
        """d m(X) / d(theta) per trainable parameter, in params() order."""
        raise NotImplementedError

    def params(self) -> list[tuple[str, Param]]:
        return []

    def with_param(self, path: str, *, value=None, trainable=None) -> "MeanFunction":
        raise UnknownPath(path)


@dataclass(frozen=True)
class Zero(MeanFunction):
    name = "zero"

    def vector(self, X):
        return np.zeros_like(_as_times(X))

    def gradients(self, X):
        return []


@dataclass(frozen=True)
class Constant(MeanFunction):
    c: Param = None

    name = "constant"

    def __post_init__(self):
        object.__setattr__(self, "c", _as_free_param(0.0 if self.c is None else self.c))

    def vector(self, X):
        return np.full_like(_as_times(X), self.c.value)

    def gradients(self, X):
        return [np.ones_like(_as_times(X))] if self.c.trainable else []

    def params(self):
        return [("constant.c", self.c)]

    def with_param(self, path, *, value=None, trainable=None):
        if path != "constant.c":
            raise UnknownPath(path)
        p = self.c
        return replace(self, c=Param(
            p.value if value is None else value,
            p.trainable if trainable is None else trainable,
            None,
        ))


@dataclass(frozen=True)
class Linear(MeanFunction):
    """m(t) = A t + b."""

    A: Param = None
    b: Param = None

    name = "linear"

    def __post_init__(self):
        object.__setattr__(self, "A", _as_free_param(1.0 if self.A is None else self.A))
        object.__setattr__(self, "b", _as_free_param(0.0 if self.b is None else self.b))

    def vector(self, X):
        X = _as_times(X)
        return self.A.value * X + self.b.value

    def gradients(self, X):
        X = _as_times(X)
        out = []
        if self.A.trainable:
            out.append(X.astype(float).copy())
        if self.b.trainable:
            out.append(np.ones_like(X))
        return out

    def params(self):
        return [("linear.A", self.A), ("linear.b", self.b)]

    def with_param(self, path, *, value=None, trainable=None):
        key = {"linear.A": "A", "linear.b": "b"}.get(path)
        if key is None:
            raise UnknownPath(path)
        p = getattr(self, key)
        return replace(self, **{key: Param(
            p.value if value is None else value,
            p.trainable if trainable is None else trainable,
            None,
        )})
