"""Trajectory data model and the per-axis fit/interpolate pipeline.

A trajectory is a time-ordered sequence of noisy (lon, lat) measurements,
each with a timestamp and an accuracy sigma. Longitude and latitude are
modeled by two independent GPs over time; prepare() extracts one axis into
a scalar regression dataset, fit_axis() trains a model on it, and
interpolate() evaluates both axis models at query timestamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import modelspec, optimize
from .errors import DuplicateTimestamp, EmptyTimestampSet
from .gpr import GPModel, predict_y

AXES = ("lon", "lat")

# mean Earth radius for the optional local equirectangular projection
EARTH_RADIUS_M = 6371008.8


@dataclass(frozen=True)
class Measurement:
    lon: float
    lat: float
    t: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError("timestamp must be finite")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    points: tuple[Measurement, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 1:
            raise ValueError("trajectory needs at least one measurement")
        ts = [p.t for p in self.points]
        for a, b in zip(ts, ts[1:]):
            if a == b:
                raise DuplicateTimestamp(f"duplicate timestamp {a!r}")
            if a > b:
                raise ValueError("measurements must be ordered by timestamp")

    @classmethod
    def from_points(cls, points) -> "Trajectory":
        """Build from measurements in any order (sorted by timestamp here)."""
        return cls(tuple(sorted(points, key=lambda p: p.t)))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class PrepConfig:
    axis: str
    sigma_prior: float | None = None
    normalize_time: bool = True

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.sigma_prior is not None and not self.sigma_prior > 0:
            raise ValueError("sigma_prior must be positive")


@dataclass(frozen=True)
class CoordinateDataset:
    """Scalar regression view of one trajectory axis."""

    X: np.ndarray
    y: np.ndarray
    sigma_m: float = 0.0
    time_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


@dataclass(frozen=True)
class LocatedPrediction:
    t: float
    lon_mean: float
    lat_mean: float
    lon_std: float
    lat_std: float


def prepare(traj: Trajectory, cfg: PrepConfig) -> CoordinateDataset:
    """Extract times and one coordinate axis; aggregate per-point sigma.

    The single measurement noise sigma_m is the root mean square of the
    per-point sigmas (identical to them when they are all equal).
    """
    ts = np.array([p.t for p in traj.points], dtype=float)
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        raise DuplicateTimestamp("timestamps must be strictly increasing")
    vals = np.array([getattr(p, cfg.axis) for p in traj.points], dtype=float)
    sigmas = np.array([p.sigma for p in traj.points], dtype=float)
    if np.all(sigmas == sigmas[0]):
        sigma_m = float(sigmas[0])
    else:
        sigma_m = float(np.sqrt(np.mean(np.square(sigmas))))
    offset = float(ts[0]) if cfg.normalize_time else 0.0
    return CoordinateDataset(X=ts - offset, y=vals, sigma_m=sigma_m, time_offset=offset)


_STATIONARY_LEAVES = ("se", "rq", "matern12", "matern32", "matern52")


def _pin_white_variance(kernel, sigma_m: float):
    paths = [p for p, _ in kernel.params() if p.endswith("white.variance")]
    if not paths:
        raise ValueError("spec has no white kernel; cannot pin measurement noise")
    for p in paths:
        kernel = kernel.with_param(p, value=max(sigma_m**2, 1e-6), trainable=False)
    return kernel


def _seed_prior_variance(kernel, sigma_prior: float):
    """Initialize the first default-valued stationary variance to sigma_prior^2."""
    for path, p in kernel.params():
        segments = path.split(".")
        name, key = segments[-2], segments[-1]
        if key == "variance" and name in _STATIONARY_LEAVES and p.trainable and p.value == 1.0:
            return kernel.with_param(path, value=sigma_prior**2)
    return kernel


def initial_model(ds: CoordinateDataset, spec: modelspec.ModelSpec, *,
                  pin_measurement_noise: bool = False,
                  sigma_prior: float | None = None) -> GPModel:
    """Untrained model for one axis with data-driven initialization applied."""
    kernel = spec.kernel
    if pin_measurement_noise:
        kernel = _pin_white_variance(kernel, ds.sigma_m)
    if sigma_prior is not None:
        kernel = _seed_prior_variance(kernel, sigma_prior)
    return modelspec.build(replace(spec, kernel=kernel), ds)


def fit_axis(ds: CoordinateDataset, spec: modelspec.ModelSpec, *,
             pin_measurement_noise: bool = False,
             sigma_prior: float | None = None,
             config: optimize.OptConfig | None = None) -> GPModel:
    """Train one axis: build from the spec, then minimize nlml."""
    model = initial_model(ds, spec, pin_measurement_noise=pin_measurement_noise,
                          sigma_prior=sigma_prior)
    result = optimize.minimize(model, config)
    return optimize.unpack(model, result.final_params)


def fit_trajectory(traj: Trajectory, spec: modelspec.ModelSpec,
                   cfg: PrepConfig | tuple[PrepConfig, PrepConfig], *,
                   pin_measurement_noise: bool = False,
                   config: optimize.OptConfig | None = None) -> tuple[GPModel, GPModel]:
    """Fit independent lon and lat models with the same spec.

    cfg may be a single PrepConfig template (axis overridden per axis) or
    an explicit (lon_cfg, lat_cfg) pair.
    """
    if isinstance(cfg, PrepConfig):
        cfgs = (replace(cfg, axis="lon"), replace(cfg, axis="lat"))
    else:
        cfgs = (cfg[0], cfg[1])
        if cfgs[0].axis != "lon" or cfgs[1].axis != "lat":
            raise ValueError("config pair must be (lon, lat)")
    models = []
    for axis_cfg in cfgs:
        ds = prepare(traj, axis_cfg)
        models.append(fit_axis(ds, spec, pin_measurement_noise=pin_measurement_noise,
                               sigma_prior=axis_cfg.sigma_prior, config=config))
    return models[0], models[1]


def interpolate(models: tuple[GPModel, GPModel], times, time_offset: float = 0.0) -> list[LocatedPrediction]:
    """Predict located positions (with stds) at each timestamp, ordered by t.

    time_offset is subtracted from query times before prediction; pass the
    offset reported by prepare() when the models were trained on
    normalized time.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise EmptyTimestampSet("no timestamps to interpolate")
    ts = np.sort(times)
    lon_model, lat_model = models
    lon = predict_y(lon_model, ts - time_offset)
    lat = predict_y(lat_model, ts - time_offset)
    return [
        LocatedPrediction(
            t=float(ts[i]),
            lon_mean=float(lon.means[i]),
            lat_mean=float(lat.means[i]),
            lon_std=float(np.sqrt(lon.variances[i])),
            lat_std=float(np.sqrt(lat.variances[i])),
        )
        for i in range(ts.size)
    ]


def lonlat_to_local(lon, lat, origin_lon: float, origin_lat: float):
    """Equirectangular projection to meters around a local origin."""
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    x = EARTH_RADIUS_M * np.cos(math.radians(origin_lat)) * np.radians(lon - origin_lon)
    y = EARTH_RADIUS_M * np.radians(lat - origin_lat)
    return x, y


def local_to_lonlat(x, y, origin_lon: float, origin_lat: float):
    """Inverse of lonlat_to_local."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lon = origin_lon + np.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(origin_lat))))
    lat = origin_lat + np.degrees(y / EARTH_RADIUS_M)
    return lon, lat


def centroid(traj: Trajectory) -> tuple[float, float]:
    """Mean (lon, lat) of the trajectory, the default projection origin."""
    return (
        float(np.mean([p.lon for p in traj.points])),
        float(np.mean([p.lat for p in traj.points])),
    )
