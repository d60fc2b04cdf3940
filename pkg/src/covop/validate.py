"""Monte Carlo oracle checks for the samplers and the closed-form covariances.

Each check returns a :class:`Check` with the observed statistic so callers
(the CLI and the test-suite) can apply or report their own tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import concentration_probe
from .estimators import sample_cov, theta_sample
from .gpsim import (
    cholesky_psd,
    sample_gaussian,
    transform_abs_centered,
    transform_abs_sin_product,
    true_cov_abs,
    true_cov_abs_sin,
)
from .kernels import BaseKernelSpec, KernelSpec, WeightSpec, assemble, make_grid

__all__ = [
    "Check",
    "check_gaussian_cov",
    "check_transform_cov",
    "check_wick_identity",
    "check_concentration",
    "run_all",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    detail: str


def _zscores(u: np.ndarray, truth: np.ndarray, se: np.ndarray) -> float:
    khat = sample_cov(u)
    return float(np.max(np.abs(khat - truth) / se))


def _empirical_se(u: np.ndarray) -> np.ndarray:
    """Standard error of each sample-covariance entry from the products' spread."""
    N = u.shape[0]
    uc = u - u.mean(axis=0)
    second = (uc * uc).T @ (uc * uc) / N
    k = uc.T @ uc / N
    return np.sqrt(np.maximum(second - k * k, 1e-300) / N)


def check_gaussian_cov(N: int = 10_000, m: int = 50, seed: int = 0, z_max: float = 5.0) -> Check:
    """Sample covariance of SE(0.1) fields against ``C`` with Wick standard errors."""
    spec = KernelSpec(BaseKernelSpec("SE", 0.1))
    C = np.asarray(assemble(spec, make_grid(1, m)))
    u = sample_gaussian(cholesky_psd(C), N, seed).values
    d = np.diag(C)
    se = np.sqrt((np.outer(d, d) + C * C) / N)
    z = _zscores(u, C, se)
    return Check("gaussian_cov", z <= z_max, z, f"max |z| = {z:.3f} (limit {z_max})")


def check_transform_cov(
    transform: str,
    N: int = 200_000,
    m: int = 20,
    seed: int = 0,
    z_max: float = 5.0,
) -> Check:
    """Monte Carlo covariance of a sub-Gaussian transform against its closed form.

    Matern(2.5) base, exponential weight with alpha 0.1, lengthscale 0.1.
    """
    spec = KernelSpec(BaseKernelSpec("Matern", 0.1, nu=2.5), WeightSpec("ExpAlpha", alpha=0.1))
    C = np.asarray(assemble(spec, make_grid(1, m)))
    factor = cholesky_psd(C)
    sigma = np.sqrt(np.diag(C))
    v1 = sample_gaussian(factor, N, seed, stream=0)
    if transform == "AbsCentered":
        u = transform_abs_centered(v1, sigma).values
        truth = true_cov_abs(C)
    elif transform == "AbsSinProduct":
        v2 = sample_gaussian(factor, N, seed, stream=1)
        u = transform_abs_sin_product(v1, v2, sigma).values
        truth = true_cov_abs_sin(C)
    else:
        raise ValueError(f"unknown transform {transform!r}")
    z = _zscores(u, truth, _empirical_se(u))
    name = "abs_centered_cov" if transform == "AbsCentered" else "abs_sin_cov"
    return Check(name, z <= z_max, z, f"max |z| = {z:.3f} (limit {z_max})")


def check_wick_identity(N: int = 10_000, m: int = 50, seed: int = 0, tol: float = 0.15) -> Check:
    """``max |theta_S - (C_ii C_jj + C_ij^2)| / (C_ii C_jj)`` for SE(0.1) fields."""
    spec = KernelSpec(BaseKernelSpec("SE", 0.1))
    C = np.asarray(assemble(spec, make_grid(1, m)))
    u = sample_gaussian(cholesky_psd(C), N, seed).values
    d = np.diag(C)
    dd = np.outer(d, d)
    dev = float(np.max(np.abs(theta_sample(u).values - (dd + C * C)) / dd))
    return Check("wick_identity", dev <= tol, dev, f"max relative deviation = {dev:.4f} (limit {tol})")


def check_concentration(
    reps: int = 20,
    n_small: int = 250,
    n_large: int = 1000,
    m: int = 50,
    seed: int = 0,
    bounds: tuple[float, float] = (0.35, 0.7),
) -> Check:
    """Ratio of mean sup-normalized errors at two sample sizes (1/sqrt(N) predicts 0.5 for 4x)."""
    spec = KernelSpec(BaseKernelSpec("SE", 0.1))
    grid = make_grid(1, m)
    big = concentration_probe(spec, grid, n_large, seed, reps)["mean"]
    small = concentration_probe(spec, grid, n_small, seed + 1, reps)["mean"]
    ratio = big / small
    ok = bounds[0] <= ratio <= bounds[1]
    return Check("concentration", ok, ratio, f"ratio = {ratio:.4f} (want {bounds[0]}..{bounds[1]})")


def run_all(seed: int = 0, quick: bool = False) -> list[Check]:
    scale = 10 if quick else 1
    return [
        check_gaussian_cov(N=10_000 // scale, seed=seed),
        check_transform_cov("AbsCentered", N=200_000 // scale, seed=seed),
        check_transform_cov("AbsSinProduct", N=200_000 // scale, seed=seed),
        check_wick_identity(seed=seed),
        check_concentration(reps=20 // (2 if quick else 1), seed=seed),
    ]
