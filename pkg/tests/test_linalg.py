import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covop.exceptions import NoConvergenceError
from covop.kernels import BaseKernelSpec, KernelSpec, WeightSpec, assemble, make_grid
from covop.linalg import DENSE_CUTOFF, dense_norm, lanczos_norm, operator_norm


def _sym(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return (a + a.T) / 2


def test_identity():
    assert operator_norm(np.eye(5)) == 1.0
    assert lanczos_norm(np.eye(300)) == pytest.approx(1.0, rel=1e-12)


def test_negative_dominant():
    assert operator_norm(np.diag([1.0, -5.0, 3.0])) == 5.0
    assert lanczos_norm(np.diag([1.0, -5.0, 3.0])) == pytest.approx(5.0, rel=1e-12)


def test_zero_and_empty():
    assert operator_norm(np.zeros((3, 3))) == 0.0
    assert lanczos_norm(np.zeros((0, 0))) == 0.0


def test_rejects_non_square():
    with pytest.raises(ValueError):
        operator_norm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        operator_norm(np.eye(2), method="power")


@pytest.mark.parametrize("n", [50, 257, 600])
def test_lanczos_matches_dense_random(n):
    for seed in range(5):
        A = _sym(n, seed)
        assert lanczos_norm(A) == pytest.approx(dense_norm(A), rel=1e-8)


def test_lanczos_on_covariance_differences():
    spec = KernelSpec(BaseKernelSpec("SE", 0.02), WeightSpec("ExpAlpha", 0.1))
    C = np.asarray(assemble(spec, make_grid(1, 500)))
    E = C.copy()
    E[np.abs(E) < 0.5] = 0
    D = E - C
    assert lanczos_norm(D) == pytest.approx(dense_norm(D), rel=1e-8)
    assert operator_norm(C) == pytest.approx(dense_norm(C), rel=1e-8)


def test_near_degenerate_ends():
    # largest magnitude shared by +3 and -3: either end gives the same answer
    A = np.diag(np.r_[3.0, -3.0, np.linspace(-1, 1, 298)])
    assert lanczos_norm(A) == pytest.approx(3.0, rel=1e-10)


def test_no_convergence():
    with pytest.raises(NoConvergenceError):
        lanczos_norm(_sym(400, 1), tol=1e-14, maxiter=3)


def test_auto_falls_back_to_dense_below_cutoff():
    A = _sym(DENSE_CUTOFF - 1, 2)
    assert operator_norm(A) == dense_norm(A)


def test_deterministic():
    A = _sym(400, 8)
    assert lanczos_norm(A) == lanczos_norm(A)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(0, 10_000))
def test_matches_dense_property(n, seed):
    A = _sym(n, seed)
    assert lanczos_norm(A) == pytest.approx(dense_norm(A), rel=1e-8, abs=1e-14)
