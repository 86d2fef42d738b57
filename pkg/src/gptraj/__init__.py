"""Exact Gaussian-process regression for timestamped geospatial trajectories.

Composable covariance kernels (gptraj.kernels), trainable mean functions
(gptraj.means), exact GP inference and prior sampling (gptraj.gpr),
marginal-likelihood training (gptraj.optimize), a small text language for
model configuration (gptraj.modelspec), and the trajectory fit/interpolate
pipeline (gptraj.trajectory). The `gptraj` command exposes fit, predict,
sample, and demo.
"""

from . import kernels, linalg, means, modelspec, optimize, trajectory
from .errors import (
    BoundViolation,
    DimensionMismatch,
    DuplicateTimestamp,
    EmptyInput,
    EmptyTimestampSet,
    GPTrajError,
    NoTrainableParams,
    NotPositiveDefinite,
    NumericalBreakdown,
    UnknownPath,
)
from .gpr import GPModel, PredictionSet, nlml, nlml_grad, predict_f, predict_y, sample_prior
from .kernels import Param
from .modelspec import ModelSpec, ParseError, build, format_spec, parse
from .optimize import OptConfig, OptResult, check_gradients, minimize, pack, unpack
from .trajectory import (
    CoordinateDataset,
    LocatedPrediction,
    Measurement,
    PrepConfig,
    Trajectory,
    fit_axis,
    fit_trajectory,
    interpolate,
    prepare,
)

__version__ = "0.1.0"

__all__ = [
    "BoundViolation",
    "CoordinateDataset",
    "DimensionMismatch",
    "DuplicateTimestamp",
    "EmptyInput",
    "EmptyTimestampSet",
    "GPTrajError",
    "GPModel",
    "LocatedPrediction",
    "Measurement",
    "ModelSpec",
    "NoTrainableParams",
    "NotPositiveDefinite",
    "NumericalBreakdown",
    "OptConfig",
    "OptResult",
    "Param",
    "ParseError",
    "PredictionSet",
    "PrepConfig",
    "Trajectory",
    "UnknownPath",
    "build",
    "check_gradients",
    "fit_axis",
    "fit_trajectory",
    "format_spec",
    "interpolate",
    "kernels",
    "linalg",
    "means",
    "minimize",
    "modelspec",
    "nlml",
    "nlml_grad",
    "optimize",
    "pack",
    "parse",
    "predict_f",
    "predict_y",
    "prepare",
    "sample_prior",
    "trajectory",
    "unpack",
]
