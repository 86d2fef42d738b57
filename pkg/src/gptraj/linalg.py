"""Dense symmetric linear algebra for exact GP regression.

Cholesky factorization with diagonal jitter escalation, triangular solves,
log-determinant and quadratic forms from a precomputed factor.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite

# jitter ladder: 0, then base * 10**k for k = 0..4
JITTER_STEPS = 5


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular factor of a symmetric matrix plus the jitter applied.

    lower @ lower.T reconstructs the input plus jitter_used * I.
    """

    lower: np.ndarray
    jitter_used: float

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def cholesky_with_jitter(matrix: np.ndarray, base_jitter: float) -> CholFactor:
    """Factor a symmetric PSD matrix, escalating diagonal jitter on failure.

    Tries jitter 0, then base_jitter * 10**k for k = 0..4. Raises
    NotPositiveDefinite once the ladder is exhausted.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"expected square matrix, got shape {m.shape}")
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not symmetric")
    if base_jitter < 0:
        raise ValueError("base_jitter must be nonnegative")

    jitters = [0.0] + [base_jitter * 10.0**k for k in range(JITTER_STEPS)]
    for j in jitters:
        try:
            lower = np.linalg.cholesky(m if j == 0.0 else m + j * np.eye(m.shape[0]))
        except np.linalg.LinAlgError:
            continue
        return CholFactor(lower=lower, jitter_used=j)
    raise NotPositiveDefinite(
        f"Cholesky failed for all jitters up to {jitters[-1]:g}"
    )


def tri_solve_lower(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L x = b for lower-triangular L by forward substitution."""
    lower = np.asarray(lower, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != lower.shape[0]:
        raise DimensionMismatch(
            f"rhs length {b.shape[0] if b.ndim == 1 else b.shape} != n {lower.shape[0]}"
        )
    return scipy.linalg.solve_triangular(lower, b, lower=True)


def solve_psd(factor: CholFactor, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b via two triangular solves."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != factor.n:
        raise DimensionMismatch(f"rhs length != n {factor.n}")
    z = scipy.linalg.solve_triangular(factor.lower, b, lower=True)
    return scipy.linalg.solve_triangular(factor.lower.T, z, lower=False)


def log_det_from_chol(factor: CholFactor) -> float:
    """ln|K + jitter*I| from the factor: 2 * sum(ln diag(L))."""
    return float(2.0 * np.sum(np.log(np.diag(factor.lower))))


def quadratic_form(factor: CholFactor, y: np.ndarray) -> float:
    """y^T (L L^T)^{-1} y, always nonnegative."""
    z = tri_solve_lower(factor.lower, y)
    return float(z @ z)
