"""Spectral norm of symmetric matrices.

Small matrices go straight to a dense eigensolver. Larger ones use Lanczos
with full reorthogonalization; the extreme Ritz value is accepted once its
residual ``beta_k * |s_k|`` falls below ``tol * |theta|``, which for a
symmetric matrix bounds the eigenvalue error by the same amount.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .exceptions import NoConvergenceError

__all__ = ["operator_norm", "lanczos_norm", "dense_norm", "DENSE_CUTOFF"]

DENSE_CUTOFF = 256


def dense_norm(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    w = np.linalg.eigvalsh(A)
    return float(max(abs(w[0]), abs(w[-1])))


def _start_vector(n: int) -> np.ndarray:
    v = np.random.default_rng(n).standard_normal(n)
    return v / np.linalg.norm(v)


def lanczos_norm(A, tol: float = 1e-10, maxiter: int | None = None) -> float:
    """Largest absolute eigenvalue of symmetric ``A`` by Lanczos iteration.

    Raises
    ------
    NoConvergenceError
        If the residual test fails after ``maxiter`` steps.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 0.0
    if maxiter is None:
        maxiter = min(n, 300)
    maxiter = min(maxiter, n)

    Q = np.empty((maxiter + 1, n))
    Q[0] = _start_vector(n)
    alpha = np.empty(maxiter)
    beta = np.empty(maxiter)
    scale = 0.0
    for j in range(maxiter):
        w = A @ Q[j]
        alpha[j] = Q[j] @ w
        # two passes of classical Gram-Schmidt keep Q orthonormal to round-off
        basis = Q[: j + 1]
        w -= basis.T @ (basis @ w)
        w -= basis.T @ (basis @ w)
        beta[j] = np.linalg.norm(w)
        scale = max(scale, abs(alpha[j]), beta[j])

        if j + 1 == maxiter or beta[j] <= 1e-14 * scale or j % 4 == 3:
            theta, S = eigh_tridiagonal(alpha[: j + 1], beta[:j]) if j else (alpha[:1], np.ones((1, 1)))
            if beta[j] <= 1e-14 * scale:
                # invariant subspace found: Ritz values are exact eigenvalues
                return float(max(abs(theta[0]), abs(theta[-1])))
            ends = (0, len(theta) - 1)
            best = max(ends, key=lambda k: abs(theta[k]))
            other = ends[1] if best == ends[0] else ends[0]
            top = abs(theta[best])
            resid_best = beta[j] * abs(S[-1, best])
            resid_other = beta[j] * abs(S[-1, other])
            # the losing end must not be able to overtake the winner
            if resid_best <= tol * top and abs(theta[other]) + resid_other <= top * (1 + tol):
                return float(top)
            if j + 1 == n:
                return float(top)
        Q[j + 1] = w / beta[j]
    raise NoConvergenceError(f"Lanczos did not converge in {maxiter} steps (n={n})")


def operator_norm(A, tol: float = 1e-10, method: str = "auto") -> float:
    """Spectral norm of symmetric ``A``.

    ``method`` is ``"auto"`` (dense below :data:`DENSE_CUTOFF`, Lanczos
    above with a dense fallback), ``"dense"`` or ``"lanczos"``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if method == "dense":
        return dense_norm(A)
    if method == "lanczos":
        return lanczos_norm(A, tol)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if A.shape[0] < DENSE_CUTOFF:
        return dense_norm(A)
    try:
        return lanczos_norm(A, tol)
    except NoConvergenceError:
        return dense_norm(A)
