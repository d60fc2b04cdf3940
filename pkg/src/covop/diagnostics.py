"""Closed-form and Monte Carlo theory quantities for weighted kernels.

These are used to check estimators and meshes against known asymptotics:
exact trace through the Dawson function, effective dimension, the weighted
sparsity functional, the variance lower bound and the expected supremum of
the normalized field.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .estimators import sample_cov
from .exceptions import KernelOverflowError
from .gpsim import cholesky_psd, make_rng
from .kernels import BaseKernelSpec, CovMatrix, Grid, KernelSpec, assemble, eval_base
from .linalg import operator_norm

__all__ = [
    "TheoryReport",
    "dawson",
    "trace_exact",
    "trace_mesh",
    "effective_dimension",
    "sparsity_rq",
    "radial_integral",
    "variance_lower_bound",
    "expected_sup_normalized",
    "concentration_probe",
    "theory_report",
]

DAWSON_SWITCH = 5.0
_LOG_MAX = math.log(np.finfo(np.float64).max)


@dataclass
class TheoryReport:
    trace_exact: float
    trace_mesh: float
    op_norm_mesh: float
    effective_dim: float
    rq_q: float
    nu_lower: float
    exp_sup_mean: float
    exp_sup_se: float

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ Dawson


def _dawson_series(x: float) -> float:
    # integral of exp(t^2) from 0 to x as a positive series, then scaled;
    # no cancellation, unlike the alternating series for D itself
    x2 = x * x
    term = x
    total = x
    n = 0
    while True:
        n += 1
        term *= x2 / n
        add = term / (2 * n + 1)
        total += add
        if add < 1e-17 * total:
            break
    return math.exp(-x2) * total


def _dawson_asymptotic(x: float) -> float:
    # D(x) ~ 1/(2x) * sum (2k-1)!! / (2x^2)^k, truncated at the smallest term
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * (2 * k - 1) * inv
        if nxt >= term or nxt < 1e-17 * total:
            break
        term = nxt
        total += term
    return total / (2.0 * x)


def dawson(x) -> float:
    """Dawson function ``exp(-x^2) * integral_0^x exp(t^2) dt`` for ``x >= 0``."""
    x = float(x)
    if x < 0:
        raise ValueError(f"dawson is implemented for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x < DAWSON_SWITCH:
        return _dawson_series(x)
    return _dawson_asymptotic(x)


def trace_exact(ktilde0: float, length_scale: float, alpha: float, d: int) -> float:
    """Exact trace of the exponentially weighted covariance operator.

    ``ktilde0 * 2^(-d/2) * lam^(alpha d/2) * (int_0^{sqrt(2/lam^alpha)} e^{t^2} dt)^d``
    with the integral written as ``e^{a^2} D(a)``.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if length_scale <= 0:
        raise ValueError("length_scale must be positive")
    upper = math.sqrt(2.0 / length_scale**alpha)
    log_integral = upper * upper + math.log(dawson(upper))
    log_tr = (
        math.log(ktilde0)
        - 0.5 * d * math.log(2.0)
        + 0.5 * alpha * d * math.log(length_scale)
        + d * log_integral
    )
    if log_tr > _LOG_MAX:
        raise KernelOverflowError(f"trace exponent {log_tr:.4g} overflows float64")
    return math.exp(log_tr)


def trace_mesh(C: CovMatrix) -> float:
    """Midpoint-rule trace ``cell_volume * sum_i C_ii``."""
    return C.grid.cell_volume * float(np.sum(np.diag(C.values)))


def effective_dimension(C: CovMatrix, tol: float = 1e-10) -> float:
    """``tr(C) / ||C||`` of the discretized integral operator."""
    norm = C.grid.cell_volume * operator_norm(C.values, tol)
    return trace_mesh(C) / norm


def sparsity_rq(spec: KernelSpec, grid: Grid, q: float, C: CovMatrix | None = None) -> float:
    """Weighted L_q sparsity level ``max_x int (k_xx k_yy)^((1-q)/2) |k_xy|^q dy``."""
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    K = np.asarray(C if C is not None else assemble(spec, grid))
    diag = np.diag(K)
    weights = np.outer(diag, diag) ** ((1.0 - q) / 2.0)
    rows = np.sum(weights * np.abs(K) ** q, axis=1)
    return grid.cell_volume * float(np.max(rows))


def radial_integral(base: BaseKernelSpec, d: int, q: float = 1.0) -> float:
    """``int_0^inf r^(d-1) k_1(r)^q dr`` for the unit-lengthscale base kernel.

    Truncated where ``k_1(r)^q`` drops below 1e-16.
    """
    if base.family == "Periodic":
        raise ValueError("the periodic correlation does not decay; its radial integral diverges")
    unit = BaseKernelSpec(base.family, 1.0, base.nu, base.eta)
    r_max = 1.0
    while eval_base(unit, r_max) ** q >= 1e-16:
        r_max *= 2.0
    val, _ = integrate.quad(
        lambda r: r ** (d - 1) * eval_base(unit, r) ** q, 0.0, r_max, epsabs=0.0, epsrel=1e-12, limit=200
    )
    return val


def variance_lower_bound(theta, C) -> float:
    """``min_ij theta_ij / (C_ii C_jj)``."""
    th = np.asarray(theta, dtype=float)
    K = np.asarray(C, dtype=float)
    d = np.diag(K)
    return float(np.min(th / np.outer(d, d)))


def _correlation_factor(spec: KernelSpec, grid: Grid):
    K = np.asarray(assemble(spec, grid))
    s = np.sqrt(np.diag(K))
    return cholesky_psd(K / np.outer(s, s))


def expected_sup_normalized(spec: KernelSpec, grid: Grid, reps: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``max_i v(x_i)/sqrt(k(x_i, x_i))``."""
    if reps < 2:
        raise ValueError(f"need at least 2 repetitions, got {reps}")
    factor = _correlation_factor(spec, grid)
    z = make_rng(seed).standard_normal((reps, grid.L))
    sups = np.max(z @ factor.lower.T, axis=1)
    return float(np.mean(sups)), float(np.std(sups, ddof=1) / math.sqrt(reps))


def concentration_probe(spec: KernelSpec, grid: Grid, N: int, seed: int, reps: int) -> dict:
    """Distribution of the sup-norm normalized sample-covariance error.

    Returns the per-rep values of ``max_ij |khat - C|_ij / sqrt(C_ii C_jj)``
    together with their mean and standard error.
    """
    K = np.asarray(assemble(spec, grid))
    factor = cholesky_psd(K)
    d = np.diag(K)
    norm = np.sqrt(np.outer(d, d))
    errs = np.empty(reps)
    for r in range(reps):
        u = make_rng(seed, r).standard_normal((N, grid.L)) @ factor.lower.T
        errs[r] = np.max(np.abs(sample_cov(u) - K) / norm)
    se = float(np.std(errs, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return {"values": errs, "mean": float(np.mean(errs)), "se": se}


def theory_report(
    spec: KernelSpec,
    grid: Grid,
    q: float = 0.5,
    reps: int = 200,
    seed: int = 0,
) -> TheoryReport:
    """Bundle the theory quantities for one kernel on one grid.

    ``trace_exact`` is only defined for the exponential weight; for other
    weights it falls back to the mesh trace of an unweighted kernel, i.e. 1.
    """
    C = assemble(spec, grid)
    K = C.values
    if spec.weight.mode == "ExpAlpha":
        tr_exact = trace_exact(1.0, spec.length_scale, spec.weight.alpha, grid.d)
    elif spec.weight.mode == "Unit":
        tr_exact = 1.0
    else:
        tr_exact = float("nan")
    d = np.diag(K)
    theta_exact = np.outer(d, d) + K * K
    mean, se = expected_sup_normalized(spec, grid, reps, seed)
    op = grid.cell_volume * operator_norm(K)
    return TheoryReport(
        trace_exact=tr_exact,
        trace_mesh=trace_mesh(C),
        op_norm_mesh=op,
        effective_dim=trace_mesh(C) / op,
        rq_q=sparsity_rq(spec, grid, q, C),
        nu_lower=variance_lower_bound(theta_exact, K),
        exp_sup_mean=mean,
        exp_sup_se=se,
    )
