"""Exception types shared across the package."""


class GPTrajError(Exception):
    """Base class for all gptraj errors."""


class NotPositiveDefinite(GPTrajError):
    """Matrix could not be Cholesky-factorized even after jitter escalation."""


class DimensionMismatch(GPTrajError):
    """Operands have incompatible shapes or lengths."""


class EmptyInput(GPTrajError):
    """An input vector that must be nonempty was empty."""


class UnknownPath(GPTrajError, KeyError):
    """Parameter path does not exist in the expression tree."""


class BoundViolation(GPTrajError, ValueError):
    """Parameter value below its lower bound."""


class DuplicateTimestamp(GPTrajError, ValueError):
    """Trajectory timestamps are not strictly increasing."""


class EmptyTimestampSet(GPTrajError):
    """Prediction requested at an empty set of timestamps."""


class NumericalBreakdown(GPTrajError):
    """Numerical failure beyond recoverable tolerance (clamping, optimization)."""


class NoTrainableParams(GPTrajError):
    """Optimization requested on a model with no trainable parameters."""
