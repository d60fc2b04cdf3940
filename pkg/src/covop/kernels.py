"""Base kernels, marginal-variance weights and discretized covariance matrices.

A nonstationary covariance function is built as

    k(x, y) = sigma(x) * sigma(y) * k_base(||x - y||)

where ``k_base`` is an isotropic correlation function with ``k_base(0) = 1``
and ``sigma`` is a marginal standard-deviation weight. Everything is evaluated
in log-space and exponentiated once, so large weights fail loudly instead of
silently overflowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special
from scipy.spatial.distance import pdist, squareform

from .exceptions import KernelOverflowError

__all__ = [
    "Grid",
    "BaseKernelSpec",
    "WeightSpec",
    "KernelSpec",
    "CovMatrix",
    "make_grid",
    "eval_base",
    "log_base",
    "matern_bessel",
    "eval_weight",
    "log_weight",
    "eval_kernel",
    "assemble",
    "permutation_from_seed",
    "weight_sup",
]

FAMILIES = ("SE", "Matern", "Periodic")
WEIGHT_MODES = ("Unit", "ExpAlpha", "ExpCustom")

# largest x with exp(x) finite in float64
_LOG_MAX = math.log(np.finfo(np.float64).max)
# below this scaled distance the Matern formula is 0 * inf; use the limit 1
_MATERN_R0 = 1e-10


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-midpoint mesh of the unit hypercube ``[0, 1]^d``.

    Points are ``(i + 1/2) * h`` per axis with ``h = 1/m``; the last axis
    varies fastest.
    """

    d: int
    m: int
    points: np.ndarray = field(repr=False)

    @property
    def L(self) -> int:
        return self.points.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def cell_volume(self) -> float:
        return self.h**self.d


def make_grid(d: int, m: int) -> Grid:
    """Build the ``m^d`` point midpoint grid on ``[0, 1]^d``."""
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if m < 2:
        raise ValueError(f"need at least 2 points per axis, got m={m}")
    axis = (np.arange(m) + 0.5) / m
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    points = np.stack([g.ravel() for g in mesh], axis=1)
    points.setflags(write=False)
    return Grid(d=d, m=m, points=points)


@dataclass(frozen=True)
class BaseKernelSpec:
    """Isotropic correlation function ``k_base(r)`` with ``k_base(0) = 1``.

    ``nu`` is only used by the Matern family and ``eta`` only by the
    periodic family.
    """

    family: str = "SE"
    length_scale: float = 0.1
    nu: float = 2.5
    eta: float = 0.2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown base family {self.family!r}; expected one of {FAMILIES}")
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if self.family == "Matern" and not self.nu > 0.5:
            raise ValueError(f"Matern smoothness must exceed 1/2, got nu={self.nu}")
        if self.family == "Periodic" and not 0 < self.eta <= 1:
            raise ValueError(f"periodicity eta must lie in (0, 1], got {self.eta}")

    def check_dimension(self, d: int) -> None:
        if self.family == "Matern" and not self.nu > max((d - 1) / 2, 0.5):
            raise ValueError(f"Matern nu={self.nu} is not valid in dimension d={d}")

    @property
    def shape_parameter(self) -> Optional[float]:
        """The family-specific extra parameter (``nu`` or ``eta``), if any."""
        if self.family == "Matern":
            return self.nu
        if self.family == "Periodic":
            return self.eta
        return None


@dataclass(frozen=True)
class WeightSpec:
    """Marginal standard-deviation weight ``sigma(x)``.

    * ``Unit``: ``sigma = 1``
    * ``ExpAlpha``: ``sigma(x) = exp(lambda**-alpha * ||x||**2)``
    * ``ExpCustom``: ``sigma(x) = exp(coeff * ||x||**power)``
    """

    mode: str = "Unit"
    alpha: float = 0.1
    coeff: float = 0.0
    power: float = 2.0

    def __post_init__(self):
        if self.mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.mode!r}; expected one of {WEIGHT_MODES}")
        if self.mode == "ExpAlpha":
            _check_alpha(self.alpha)


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")


@dataclass(frozen=True)
class KernelSpec:
    """Full nonstationary covariance ``sigma(x) sigma(y) k_base(||x - y||)``.

    When ``permutation_seed`` is set, grid labels are shuffled before the
    kernel is evaluated by :func:`assemble`.
    """

    base: BaseKernelSpec = field(default_factory=BaseKernelSpec)
    weight: WeightSpec = field(default_factory=WeightSpec)
    permutation_seed: Optional[int] = None

    @property
    def length_scale(self) -> float:
        return self.base.length_scale

    def with_length_scale(self, length_scale: float) -> "KernelSpec":
        base = BaseKernelSpec(self.base.family, length_scale, self.base.nu, self.base.eta)
        return KernelSpec(base, self.weight, self.permutation_seed)


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """Kernel evaluated on every pair of grid points.

    Behaves like an ndarray wherever numpy expects one.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape


# --------------------------------------------------------------------- base


def matern_bessel(r, length_scale: float, nu: float) -> np.ndarray:
    """General Matern correlation through the modified Bessel function K_nu.

    Works for any ``nu > 0``; :func:`log_base` prefers closed forms at
    half-integer ``nu`` and falls back to this routine otherwise.
    """
    return np.exp(_log_matern_bessel(np.asarray(r, dtype=float), length_scale, nu))


def _log_matern_bessel(r: np.ndarray, length_scale: float, nu: float) -> np.ndarray:
    s = math.sqrt(2.0 * nu) * r / length_scale
    out = np.zeros_like(s)
    pos = s >= _MATERN_R0
    sp = s[pos]
    with np.errstate(divide="ignore"):
        # kve(nu, s) = K_nu(s) * exp(s): no underflow until s is astronomical
        out[pos] = (
            (1.0 - nu) * math.log(2.0)
            - special.gammaln(nu)
            + nu * np.log(sp)
            + np.log(special.kve(nu, sp))
            - sp
        )
    if np.isnan(out).any():
        raise FloatingPointError(f"Bessel evaluation produced NaN (nu={nu})")
    return out


def _log_matern_closed(r: np.ndarray, length_scale: float, nu: float) -> Optional[np.ndarray]:
    s = math.sqrt(2.0 * nu) * r / length_scale
    if nu == 0.5:
        return -s
    if nu == 1.5:
        return np.log1p(s) - s
    if nu == 2.5:
        return np.log1p(s + s * s / 3.0) - s
    return None


def log_base(base: BaseKernelSpec, r) -> np.ndarray:
    """Natural log of the base correlation at distance(s) ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distances must be nonnegative")
    lam = base.length_scale
    if base.family == "SE":
        return -(r * r) / (2.0 * lam * lam)
    if base.family == "Matern":
        closed = _log_matern_closed(r, lam, base.nu)
        return closed if closed is not None else _log_matern_bessel(r, lam, base.nu)
    s = np.sin(np.pi * r / base.eta)
    return -2.0 * s * s / (lam * lam)


def eval_base(base: BaseKernelSpec, r) -> np.ndarray:
    """Base correlation ``k_base(r)``; scalars in, scalars out."""
    out = np.exp(log_base(base, r))
    return out if out.ndim else float(out)


# ------------------------------------------------------------------- weight


def log_weight(weight: WeightSpec, length_scale: float, x) -> np.ndarray:
    """Natural log of ``sigma(x)``; ``x`` has shape ``(d,)`` or ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1)
    if weight.mode == "Unit":
        return np.zeros_like(sq)
    if weight.mode == "ExpAlpha":
        _check_alpha(weight.alpha)
        return length_scale ** (-weight.alpha) * sq
    return weight.coeff * np.sqrt(sq) ** weight.power


def eval_weight(weight: WeightSpec, length_scale: float, x) -> np.ndarray:
    out = _safe_exp(log_weight(weight, length_scale, x))
    return out if out.ndim else float(out)


def weight_sup(weight: WeightSpec, length_scale: float, d: int) -> float:
    """Supremum of ``sigma`` over ``[0, 1]^d`` (attained at the far corner)."""
    return float(eval_weight(weight, length_scale, np.ones(d)))


# ------------------------------------------------------------------- kernel


def _safe_exp(logv: np.ndarray) -> np.ndarray:
    top = np.max(logv) if np.size(logv) else -np.inf
    if top > _LOG_MAX:
        raise KernelOverflowError(
            f"kernel exponent {top:.4g} exceeds the float64 limit {_LOG_MAX:.4g}"
        )
    return np.exp(logv)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Covariance ``k(x, y)`` between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lam = spec.length_scale
    r = math.sqrt(float(np.sum((x - y) ** 2)))
    # sum the two weights in a fixed order so k(x, y) == k(y, x) bit for bit
    lw = sorted((float(log_weight(spec.weight, lam, x)), float(log_weight(spec.weight, lam, y))))
    total = lw[0] + lw[1] + float(log_base(spec.base, r))
    return float(_safe_exp(np.asarray(total)))


def permutation_from_seed(seed: int, L: int) -> np.ndarray:
    """Fisher-Yates shuffle of ``range(L)`` driven by a Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    perm = np.arange(L)
    for i in range(L - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def assemble(spec: KernelSpec, grid: Grid) -> CovMatrix:
    """Evaluate the kernel on all pairs of (possibly shuffled) grid points."""
    spec.base.check_dimension(grid.d)
    points = grid.points
    if spec.permutation_seed is not None:
        points = points[permutation_from_seed(spec.permutation_seed, grid.L)]
    lam = spec.length_scale
    lw = log_weight(spec.weight, lam, points)
    dist = squareform(pdist(points)) if grid.L > 1 else np.zeros((1, 1))
    logk = lw[:, None] + lw[None, :] + log_base(spec.base, dist)
    values = _safe_exp(logk)
    upper = np.triu(values)
    values = upper + np.triu(values, 1).T
    values.setflags(write=False)
    return CovMatrix(grid=grid, values=values)
