"""Sparse covariance-operator estimation for nonstationary random fields."""

from .estimators import (
    AdaptiveThresholdCovariance,
    SampleCovariance,
    UniversalThresholdCovariance,
    adaptive_threshold,
    radius_grid,
    relative_error,
    rho_hat,
    sample_cov,
    select_best_radius,
    theta_sample,
    theta_wick,
    universal_threshold,
)
from .gpsim import cholesky_psd, sample_gaussian
from .kernels import BaseKernelSpec, KernelSpec, WeightSpec, assemble, make_grid
from .linalg import operator_norm

__version__ = "0.1.0"

__all__ = [
    "AdaptiveThresholdCovariance",
    "SampleCovariance",
    "UniversalThresholdCovariance",
    "BaseKernelSpec",
    "KernelSpec",
    "WeightSpec",
    "adaptive_threshold",
    "assemble",
    "cholesky_psd",
    "make_grid",
    "operator_norm",
    "radius_grid",
    "relative_error",
    "rho_hat",
    "sample_cov",
    "sample_gaussian",
    "select_best_radius",
    "theta_sample",
    "theta_wick",
    "universal_threshold",
]
