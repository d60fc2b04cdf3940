"""Sample, universal-threshold and adaptive-threshold covariance estimators.

The functional layer (``sample_cov``, ``theta_sample``, ...) works on plain
``(N, L)`` sample arrays and ``(L, L)`` matrices so the harness can compute
the sample covariance once and threshold it many times. The scikit-learn
style classes at the bottom wrap the same functions behind ``fit``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateDiagonalError, DegenerateTruthError
from .linalg import operator_norm

__all__ = [
    "ThetaMatrix",
    "EstimateResult",
    "sample_cov",
    "theta_sample",
    "theta_wick",
    "rho_hat",
    "universal_threshold",
    "adaptive_threshold",
    "radius_grid",
    "relative_error",
    "select_best_radius",
    "SampleCovariance",
    "UniversalThresholdCovariance",
    "AdaptiveThresholdCovariance",
]

DIAG_FLOOR = 1e-300
DEFAULT_C0 = 5.0


@dataclass(frozen=True, eq=False)
class ThetaMatrix:
    values: np.ndarray = field(repr=False)
    kind: str = "SampleBased"

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class EstimateResult:
    matrix: np.ndarray = field(repr=False)
    estimator: str
    radius: float
    nnz_fraction: float

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def _samples(samples) -> np.ndarray:
    u = np.asarray(samples, dtype=float)
    if u.ndim != 2 or u.shape[0] < 1:
        raise ValueError(f"samples must have shape (N, L) with N >= 1, got {u.shape}")
    return u


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return np.triu(a) + np.triu(a, 1).T


def sample_cov(samples) -> np.ndarray:
    """``(1/N) sum_n u_n u_n^T`` for known-zero-mean data."""
    u = _samples(samples)
    return _symmetrize(u.T @ u / u.shape[0])


def theta_sample(samples, khat=None) -> ThetaMatrix:
    """Sample variance of the products ``u(x_i) u(x_j)``."""
    u = _samples(samples)
    if khat is None:
        khat = sample_cov(u)
    khat = np.asarray(khat, dtype=float)
    sq = u * u
    fourth = _symmetrize(sq.T @ sq / u.shape[0])
    return ThetaMatrix(np.maximum(fourth - khat * khat, 0.0), kind="SampleBased")


def theta_wick(khat) -> ThetaMatrix:
    """Gaussian variance component ``k_ii k_jj + k_ij**2`` from ``khat``."""
    khat = np.asarray(khat, dtype=float)
    d = np.diag(khat)
    return ThetaMatrix(np.outer(d, d) + khat * khat, kind="Wick")


def rho_hat(samples, khat=None, c0: float = DEFAULT_C0) -> float:
    """Data-driven adaptive radius ``(c0/sqrt(N)) * mean_n max_i u_n(x_i)/sqrt(khat_ii)``.

    The inner maximum is over the signed normalized field, not its absolute
    value.
    """
    u = _samples(samples)
    if khat is None:
        khat = sample_cov(u)
    diag = np.diag(np.asarray(khat, dtype=float))
    if np.any(diag <= DIAG_FLOOR):
        raise DegenerateDiagonalError(
            f"{int(np.sum(diag <= DIAG_FLOOR))} sample variances are <= {DIAG_FLOOR:g}; "
            "N is too small or the field is degenerate"
        )
    normalized = u / np.sqrt(diag)
    N = u.shape[0]
    return float(c0 / np.sqrt(N) * np.mean(np.max(normalized, axis=1)))


def _result(khat: np.ndarray, keep: np.ndarray, estimator: str, radius: float) -> EstimateResult:
    matrix = np.where(keep, khat, 0.0)
    nnz = float(np.count_nonzero(matrix)) / matrix.size if matrix.size else 0.0
    return EstimateResult(matrix=matrix, estimator=estimator, radius=float(radius), nnz_fraction=nnz)


def universal_threshold(khat, gamma: float) -> EstimateResult:
    """Keep entries with ``|khat_ij| >= gamma``."""
    if gamma < 0:
        raise ValueError(f"radius must be nonnegative, got {gamma}")
    khat = np.asarray(khat, dtype=float)
    return _result(khat, np.abs(khat) >= gamma, "Universal", gamma)


def adaptive_threshold(khat, theta, rho: float) -> EstimateResult:
    """Keep entries with ``|khat_ij| >= rho * sqrt(theta_ij)``.

    Where ``theta_ij == 0`` the studentized ratio is read as infinite, so the
    entry survives whenever ``khat_ij != 0``.
    """
    if rho < 0:
        raise ValueError(f"radius must be nonnegative, got {rho}")
    khat = np.asarray(khat, dtype=float)
    th = np.asarray(theta, dtype=float)
    kind = getattr(theta, "kind", "SampleBased")
    keep = np.abs(khat) >= rho * np.sqrt(th)
    keep |= (th == 0) & (khat != 0)
    name = "AdaptiveWick" if kind == "Wick" else "AdaptiveSample"
    return _result(khat, keep, name, rho)


def radius_grid(rho_max: float, count: int) -> np.ndarray:
    """``count`` equally spaced radii from 0 to ``rho_max`` inclusive."""
    if rho_max < 0:
        raise ValueError(f"rho_max must be nonnegative, got {rho_max}")
    if count < 2:
        raise ValueError(f"need at least 2 radii, got {count}")
    return np.linspace(0.0, rho_max, count)


def relative_error(estimate, truth, tol: float = 1e-10, truth_norm: float | None = None) -> float:
    """``||estimate - truth|| / ||truth||`` in the spectral norm.

    Pass ``truth_norm`` to skip recomputing the denominator.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    if truth_norm is None:
        truth_norm = operator_norm(truth, tol)
    if truth_norm == 0:
        raise DegenerateTruthError("reference covariance has zero operator norm")
    return operator_norm(estimate - truth, tol) / truth_norm


def select_best_radius(radii: Sequence[float], errors: Sequence[float]) -> tuple[int, float, float]:
    """Index, radius and error of the smallest error; ties go to the smallest radius."""
    radii = np.asarray(radii, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if radii.size == 0 or radii.shape != errors.shape:
        raise ValueError("radii and errors must be nonempty and of equal length")
    best = min(range(radii.size), key=lambda i: (errors[i], radii[i]))
    return best, float(radii[best]), float(errors[best])


# ------------------------------------------------------ estimator classes


class _CovarianceEstimator(BaseEstimator):
    def _validate(self, X) -> np.ndarray:
        return check_array(X, dtype=np.float64, ensure_min_samples=1)

    def error_norm(self, covariance, relative: bool = True) -> float:
        """Spectral-norm error of the fitted estimate against ``covariance``."""
        check_is_fitted(self, "covariance_")
        if relative:
            return relative_error(self.covariance_, covariance)
        return operator_norm(self.covariance_ - np.asarray(covariance, dtype=float))


class SampleCovariance(_CovarianceEstimator):
    """Zero-mean sample covariance of rows of ``X`` (one row per realization)."""

    def fit(self, X, y=None):
        X = self._validate(X)
        self.covariance_ = sample_cov(X)
        self.n_samples_, self.n_features_in_ = X.shape
        return self


class UniversalThresholdCovariance(_CovarianceEstimator):
    """Hard-threshold the sample covariance at one global radius.

    Parameters
    ----------
    radius : float or None
        Threshold in variance units. ``None`` uses ``rho_hat(X, c0) * scale``.
    c0 : float
        Pre-factor of the data-driven radius.
    scale : float
        Variance scale multiplying the data-driven radius, e.g. the supremum
        of the marginal standard deviation.
    """

    def __init__(self, radius=None, c0=DEFAULT_C0, scale=1.0):
        self.radius = radius
        self.c0 = c0
        self.scale = scale

    def fit(self, X, y=None):
        X = self._validate(X)
        khat = sample_cov(X)
        radius = self.radius
        if radius is None:
            radius = rho_hat(X, khat, self.c0) * self.scale
        res = universal_threshold(khat, radius)
        self.covariance_ = res.matrix
        self.radius_ = res.radius
        self.nnz_fraction_ = res.nnz_fraction
        self.n_samples_, self.n_features_in_ = X.shape
        return self


class AdaptiveThresholdCovariance(_CovarianceEstimator):
    """Threshold each sample-covariance entry against its own standard error.

    Parameters
    ----------
    radius : float or None
        Dimensionless radius. ``None`` uses the data-driven ``rho_hat``.
    c0 : float
        Pre-factor of the data-driven radius.
    variance : {"sample", "wick"}
        Estimator of the variance of ``u(x) u(y)``.
    """

    def __init__(self, radius=None, c0=DEFAULT_C0, variance="sample"):
        self.radius = radius
        self.c0 = c0
        self.variance = variance

    def fit(self, X, y=None):
        X = self._validate(X)
        if self.variance not in ("sample", "wick"):
            raise ValueError(f"variance must be 'sample' or 'wick', got {self.variance!r}")
        khat = sample_cov(X)
        theta = theta_sample(X, khat) if self.variance == "sample" else theta_wick(khat)
        radius = self.radius
        if radius is None:
            radius = rho_hat(X, khat, self.c0)
        res = adaptive_threshold(khat, theta, radius)
        self.covariance_ = res.matrix
        self.theta_ = theta.values
        self.radius_ = res.radius
        self.nnz_fraction_ = res.nnz_fraction
        self.n_samples_, self.n_features_in_ = X.shape
        return self
