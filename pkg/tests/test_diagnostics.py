import math

import numpy as np
import pytest
from scipy import integrate

from covop.diagnostics import (
    DAWSON_SWITCH,
    concentration_probe,
    dawson,
    effective_dimension,
    expected_sup_normalized,
    radial_integral,
    sparsity_rq,
    theory_report,
    trace_exact,
    trace_mesh,
    variance_lower_bound,
)
from covop.estimators import theta_sample
from covop.exceptions import KernelOverflowError
from covop.gpsim import cholesky_psd, sample_gaussian
from covop.kernels import BaseKernelSpec, KernelSpec, WeightSpec, assemble, make_grid

# Regression bands for asymptotic "same order" statements. The theory gives
# only rates with unknown constants; these are the observed values at first
# run with some slack, frozen so that drift is noticed.
TRACE_BAND = (0.27, 0.33)  # trace / (lam^(alpha d) e^(2d/lam^alpha)), alpha=0.2, d=1
EFFDIM_UNIT_BAND = (0.35, 0.6)  # effective_dim * lam, unweighted SE
EFFDIM_WEIGHTED_BAND = (0.09, 0.5)  # effective_dim * lam, SE with alpha=0.1
RQ_BAND = (0.25, 1.45)  # rq / (q^-d lam^(d(alpha+1)) e^(2d/lam^alpha) radial), SE and Matern
SUP_BAND = (0.8, 1.35)  # E[sup] / sqrt(log(1/lam)), unweighted SE


def _ones(m, d=1):
    # sigma(x) = 1 and a base correlation that is 1 everywhere on [0, 1]
    return KernelSpec(BaseKernelSpec("Periodic", 1e6, eta=1.0)), make_grid(d, m)


class TestDawson:
    def test_zero(self):
        assert dawson(0) == 0.0

    def test_small(self):
        x = 1e-3
        assert dawson(x) == pytest.approx(x - 2 * x**3 / 3, rel=1e-12)

    def test_one(self):
        ref = math.exp(-1) * integrate.quad(lambda t: math.exp(t * t), 0, 1, epsabs=1e-14, epsrel=1e-13)[0]
        assert abs(dawson(1.0) - ref) <= 1e-12

    def test_asymptote(self):
        assert dawson(50) * 100 == pytest.approx(1.0, abs=1e-3)

    def test_continuity_at_switch(self):
        lo = dawson(np.nextafter(DAWSON_SWITCH, 0))
        hi = dawson(DAWSON_SWITCH)
        assert abs(lo - hi) <= 1e-10

    def test_negative(self):
        with pytest.raises(ValueError):
            dawson(-1)

    def test_matches_scipy(self):
        from scipy.special import dawsn

        for x in np.r_[np.linspace(0, 12, 241), 20.0, 100.0, 1e4]:
            # the asymptotic branch just above the switch is the weakest point, about 2e-12 absolute
            assert abs(dawson(float(x)) - dawsn(x)) <= 1e-11


class TestTrace:
    def test_unit_upper_limit(self):
        # lambda^alpha = 2 makes the integral's upper limit 1
        alpha = 0.2
        lam = 2 ** (1 / alpha)
        ref = integrate.quad(lambda t: math.exp(t * t), 0, 1, epsabs=1e-14)[0]
        assert trace_exact(1.0, lam, alpha, 1) == pytest.approx(ref, rel=1e-12)

    def test_product_structure(self):
        for lam in (0.01, 0.1, 0.5):
            t1 = trace_exact(1.0, lam, 0.3, 1)
            assert trace_exact(1.0, lam, 0.3, 2) == pytest.approx(t1**2, rel=1e-12)
            assert trace_exact(2.0, lam, 0.3, 2) == pytest.approx(t1**2 * 2, rel=1e-12)

    def test_small_lambda_band(self):
        for lam in 10.0 ** np.linspace(-2, -1, 6):
            ratio = trace_exact(1.0, lam, 0.2, 1) / (lam**0.2 * math.exp(2 / lam**0.2))
            assert TRACE_BAND[0] <= ratio <= TRACE_BAND[1]

    def test_overflow(self):
        with pytest.raises(KernelOverflowError):
            trace_exact(1.0, 1e-30, 0.49, 3)

    def test_mesh_of_constant(self):
        spec, g = _ones(37)
        assert trace_mesh(assemble(spec, g)) == pytest.approx(1.0, rel=1e-14)

    def test_mesh_converges(self):
        spec = KernelSpec(BaseKernelSpec("SE", 0.05), WeightSpec("ExpAlpha", 0.1))
        exact = trace_exact(1.0, 0.05, 0.1, 1)
        errs = [abs(trace_mesh(assemble(spec, make_grid(1, m))) - exact) for m in (250, 500, 1000, 2000)]
        assert all(a > b for a, b in zip(errs, errs[1:]))
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 1.9


class TestEffectiveDimension:
    def test_rank_one(self):
        spec, g = _ones(60)
        assert effective_dimension(assemble(spec, g)) == pytest.approx(1.0, rel=1e-10)

    @pytest.mark.parametrize(
        "weight,band",
        [(WeightSpec("Unit"), EFFDIM_UNIT_BAND), (WeightSpec("ExpAlpha", 0.1), EFFDIM_WEIGHTED_BAND)],
    )
    def test_band(self, weight, band):
        g = make_grid(1, 500)
        for lam in 10.0 ** np.array([-2, -1.5, -1, -0.5]):
            val = effective_dimension(assemble(KernelSpec(BaseKernelSpec("SE", lam), weight), g)) * lam
            assert band[0] <= val <= band[1]


class TestSparsity:
    def test_constant(self):
        spec, g = _ones(30)
        assert sparsity_rq(spec, g, 0.3) == pytest.approx(1.0, rel=1e-12)

    def test_q_to_one(self):
        spec = KernelSpec(BaseKernelSpec("SE", 0.1), WeightSpec("ExpAlpha", 0.2))
        g = make_grid(1, 80)
        K = np.asarray(assemble(spec, g))
        limit = g.cell_volume * np.abs(K).sum(axis=1).max()
        assert sparsity_rq(spec, g, 1 - 1e-9) == pytest.approx(limit, rel=1e-7)

    def test_rejects_q(self):
        spec, g = _ones(5)
        for q in (0.0, 1.0):
            with pytest.raises(ValueError):
                sparsity_rq(spec, g, q)

    @pytest.mark.parametrize("family", ["SE", "Matern"])
    def test_band(self, family):
        q, alpha = 0.5, 0.1
        g = make_grid(1, 500)
        radial = radial_integral(BaseKernelSpec(family, 1.0), 1, q)
        for lam in 10.0 ** np.array([-2, -1.5, -1, -0.5]):
            spec = KernelSpec(BaseKernelSpec(family, lam), WeightSpec("ExpAlpha", alpha))
            ratio = sparsity_rq(spec, g, q) / (q**-1 * lam ** (1 + alpha) * math.exp(2 / lam**alpha) * radial)
            assert RQ_BAND[0] <= ratio <= RQ_BAND[1]

    def test_radial_integral_se(self):
        # int_0^inf exp(-q r^2 / 2) dr = sqrt(pi / (2q))
        assert radial_integral(BaseKernelSpec("SE", 0.3), 1, 0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-10)
        assert radial_integral(BaseKernelSpec("SE", 0.3), 2, 1.0) == pytest.approx(1.0, rel=1e-10)

    def test_radial_integral_periodic(self):
        with pytest.raises(ValueError):
            radial_integral(BaseKernelSpec("Periodic", 1.0), 1)


class TestVarianceBound:
    def test_gaussian_theta(self):
        C = np.asarray(assemble(KernelSpec(BaseKernelSpec("SE", 0.05), WeightSpec("ExpAlpha", 0.1)), make_grid(1, 60)))
        d = np.diag(C)
        theta = np.outer(d, d) + C * C
        rho = C / np.sqrt(np.outer(d, d))
        nu = variance_lower_bound(theta, C)
        assert nu >= 1
        assert nu == pytest.approx(1 + np.min(rho**2), abs=1e-12)
        np.testing.assert_allclose(np.diag(theta) / d**2, 2.0)

    def test_estimated(self):
        C = np.asarray(assemble(KernelSpec(BaseKernelSpec("SE", 0.1)), make_grid(1, 50)))
        d = np.diag(C)
        exact = variance_lower_bound(np.outer(d, d) + C * C, C)
        u = sample_gaussian(cholesky_psd(C), 10_000, 0).values
        assert variance_lower_bound(theta_sample(u), C) == pytest.approx(exact, rel=0.1)


class TestExpectedSup:
    def test_single_point(self):
        # a huge lengthscale makes every grid value the same standard normal
        mean, se = expected_sup_normalized(KernelSpec(BaseKernelSpec("SE", 1e6)), make_grid(1, 2), 2000, 0)
        assert abs(mean) <= 3 * se

    def test_independent_points(self):
        # tiny lengthscale: correlation matrix is the identity to machine precision
        spec = KernelSpec(BaseKernelSpec("SE", 1e-4))
        mean, se = expected_sup_normalized(spec, make_grid(1, 100), 4000, 1)
        oracle = np.random.default_rng(77).standard_normal((200_000, 100)).max(axis=1).mean()
        assert abs(mean - oracle) <= 3 * se

    def test_band(self):
        g = make_grid(1, 500)
        for lam in 10.0 ** np.linspace(-2.2, -0.1, 6):
            mean, _ = expected_sup_normalized(KernelSpec(BaseKernelSpec("SE", lam)), g, 200, 0)
            assert SUP_BAND[0] <= mean / math.sqrt(math.log(1 / lam)) <= SUP_BAND[1]

    def test_reps(self):
        with pytest.raises(ValueError):
            expected_sup_normalized(KernelSpec(), make_grid(1, 3), 1, 0)


class TestConcentration:
    def test_ratio(self):
        spec, g = KernelSpec(BaseKernelSpec("SE", 0.1)), make_grid(1, 50)
        ratio = concentration_probe(spec, g, 1000, 0, 20)["mean"] / concentration_probe(spec, g, 250, 1, 20)["mean"]
        assert 0.35 <= ratio <= 0.7

    def test_single_point(self):
        spec = KernelSpec(BaseKernelSpec("SE", 0.1), WeightSpec("ExpAlpha", 0.3))
        g = make_grid(1, 2)
        out = concentration_probe(spec, g, 30, 5, 4)
        assert out["values"].shape == (4,)
        assert out["mean"] >= 0

    def test_scale_free(self):
        # power 0 gives the constant weight e^2, i.e. the same field scaled by e^2
        g = make_grid(1, 20)
        a = concentration_probe(KernelSpec(BaseKernelSpec("SE", 0.1)), g, 100, 2, 3)["values"]
        b = concentration_probe(
            KernelSpec(BaseKernelSpec("SE", 0.1), WeightSpec("ExpCustom", coeff=2.0, power=0.0)), g, 100, 2, 3
        )["values"]
        np.testing.assert_allclose(a, b, rtol=1e-9)


def test_theory_report_keys():
    spec = KernelSpec(BaseKernelSpec("SE", 0.1), WeightSpec("ExpAlpha", 0.1))
    rep = theory_report(spec, make_grid(1, 200), q=0.5, reps=20, seed=0).to_dict()
    assert list(rep) == [
        "trace_exact", "trace_mesh", "op_norm_mesh", "effective_dim", "rq_q", "nu_lower", "exp_sup_mean", "exp_sup_se",
    ]
    assert rep["trace_mesh"] == pytest.approx(rep["trace_exact"], rel=1e-3)
    assert rep["nu_lower"] >= 1
