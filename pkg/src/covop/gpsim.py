"""Exact Gaussian field sampling and sub-Gaussian transforms.

Samples are drawn as ``L @ z`` with ``L`` a jittered Cholesky factor and
``z`` standard normal from a Philox (counter-based) stream, so a
``(factor, N, seed)`` triple always reproduces the same array.

The ``true_cov_*`` helpers give the exact covariance of the transformed
fields in terms of the Gaussian covariance ``C`` they were built from.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import KernelOverflowError, NotPSDError
from .kernels import KernelSpec

__all__ = [
    "CholFactor",
    "JitterPolicy",
    "SampleSet",
    "cholesky_psd",
    "make_rng",
    "sample_gaussian",
    "transform_abs_centered",
    "transform_abs_sin_product",
    "true_cov_sin",
    "true_cov_abs",
    "true_cov_abs_sin",
    "write_samples",
    "read_samples",
]

TRANSFORMS = ("Gaussian", "AbsCentered", "AbsSinProduct")
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_CLAMP_TOL = 1e-12
_LOG_MAX = np.log(np.finfo(np.float64).max)


@dataclass(frozen=True)
class JitterPolicy:
    """Geometric jitter schedule, relative to the largest diagonal entry."""

    initial: float = 1e-12
    growth: float = 10.0
    max: float = 1e-6


@dataclass(frozen=True, eq=False)
class CholFactor:
    lower: np.ndarray = field(repr=False)
    jitter_used: float = 0.0


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``N x L`` array of field realizations plus provenance."""

    values: np.ndarray = field(repr=False)
    seed: int = 0
    kernel: Optional[KernelSpec] = None
    transform: str = "Gaussian"

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("samples must be a 2-d array with at least one row")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def cholesky_psd(C, jitter_policy: JitterPolicy = JitterPolicy()) -> CholFactor:
    """Lower Cholesky factor of ``C + eps*I`` for the smallest workable eps.

    Tries ``eps = 0`` first, then walks the geometric schedule up to
    ``jitter_policy.max * max(diag)``.
    """
    C = np.asarray(C, dtype=float)
    scale = float(np.max(np.diag(C))) if C.size else 1.0
    eps = 0.0
    step = jitter_policy.initial * scale
    ceiling = jitter_policy.max * scale * (1 + 1e-12)
    eye = np.eye(C.shape[0])
    while True:
        try:
            lower = np.linalg.cholesky(C + eps * eye if eps else C)
            if np.all(np.isfinite(lower)):
                return CholFactor(lower=lower, jitter_used=eps)
        except np.linalg.LinAlgError:
            pass
        if eps == 0.0:
            eps = step
        else:
            eps *= jitter_policy.growth
        if eps > ceiling:
            raise NotPSDError(
                f"Cholesky failed with jitter up to {jitter_policy.max:g} x max(diag); "
                "the kernel specification is probably not positive semidefinite"
            )


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent Philox substream ``stream`` of the master ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def sample_gaussian(
    factor: CholFactor,
    N: int,
    seed: int,
    *,
    stream: int = 0,
    kernel: Optional[KernelSpec] = None,
) -> SampleSet:
    """Draw ``N`` centered Gaussian fields with covariance ``lower @ lower.T``."""
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    lower = factor.lower
    z = make_rng(seed, stream).standard_normal((N, lower.shape[0]))
    values = z @ lower.T
    return SampleSet(values=values, seed=seed, kernel=kernel, transform="Gaussian")


def transform_abs_centered(v: SampleSet, sigma) -> SampleSet:
    """``|v| - E|v|`` using the marginal standard deviations ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (v.L,):
        raise ValueError(f"sigma has shape {sigma.shape}, expected ({v.L},)")
    values = np.abs(v.values) - sigma * _SQRT_2_OVER_PI
    return SampleSet(values=values, seed=v.seed, kernel=v.kernel, transform="AbsCentered")


def transform_abs_sin_product(v1: SampleSet, v2: SampleSet, sigma) -> SampleSet:
    """``(|v1| - E|v1|) * sin(v2)`` for independent Gaussian ``v1``, ``v2``."""
    if v1.values.shape != v2.values.shape:
        raise ValueError(f"sample shapes differ: {v1.values.shape} vs {v2.values.shape}")
    centered = transform_abs_centered(v1, sigma).values
    values = centered * np.sin(v2.values)
    return SampleSet(values=values, seed=v1.seed, kernel=v1.kernel, transform="AbsSinProduct")


# ------------------------------------------------------- closed-form truths


def _symmetric(a: np.ndarray) -> np.ndarray:
    return np.triu(a) + np.triu(a, 1).T


def true_cov_sin(C) -> np.ndarray:
    """Covariance of ``sin(v)`` for ``v ~ N(0, C)``."""
    C = np.asarray(C, dtype=float)
    d = np.diag(C)
    expo = -(d[:, None] + d[None, :]) / 2.0
    if np.max(np.abs(C)) > _LOG_MAX:
        raise KernelOverflowError("sinh argument exceeds the float64 range")
    return _symmetric(np.exp(expo) * np.sinh(C))


def _correlation(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = np.diag(C)
    scale = np.sqrt(np.outer(d, d))
    rho = C / scale
    if np.any(np.abs(rho) > 1.0 + _CLAMP_TOL):
        raise ValueError("covariance has correlations outside [-1, 1]")
    return np.clip(rho, -1.0, 1.0), scale


def true_cov_abs(C) -> np.ndarray:
    """Covariance of ``|v| - E|v|`` for ``v ~ N(0, C)``."""
    C = np.asarray(C, dtype=float)
    rho, scale = _correlation(C)
    out = (2.0 * scale / np.pi) * (np.sqrt(1.0 - rho * rho) + rho * np.arcsin(rho) - 1.0)
    return _symmetric(out)


def true_cov_abs_sin(C) -> np.ndarray:
    """Covariance of ``(|v1| - E|v1|) * sin(v2)``, with v1, v2 iid ``N(0, C)``."""
    return _symmetric(true_cov_abs(C) * true_cov_sin(C))


# ----------------------------------------------------------- binary dumps

_MAGIC = b"COVSMP01"
_HEADER = struct.Struct("<8sIIQ")


def write_samples(samples: SampleSet, path) -> None:
    """Dump samples as a 24-byte header and little-endian float64 rows."""
    path = Path(path)
    body = np.ascontiguousarray(samples.values, dtype="<f8")
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, samples.N, samples.L, samples.seed))
        fh.write(body.tobytes())


def read_samples(path) -> SampleSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a sample header")
    magic, N, L, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if values.size != N * L:
        raise ValueError(f"{path}: expected {N * L} values, found {values.size}")
    return SampleSet(values=values.reshape(N, L).astype(np.float64), seed=seed)
