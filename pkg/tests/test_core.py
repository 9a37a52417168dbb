import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from alphageom.core import (
    ExpectationEngine,
    _numeric_hessian,
    _numeric_score,
    ParameterPoint,
    expect,
    expect_with_error,
    expectation_nodes,
    log_density,
    log_density_hessian,
    score,
)
from alphageom.errors import DomainError, SupportError, UnsupportedEngineError
from alphageom.families import GaussianLocationFamily, GeneralizedGaussianFamily, OrthantGaussianFamily
from alphageom.geometry import score_moments

QUAD = ExpectationEngine.quadrature()

_x, _mu, _sigma = sp.symbols("x mu sigma", real=True)


def sympy_derivatives(beta):
    """Score and Hessian of the M1 log-density, differentiated symbolically."""
    l = sp.log(beta) - sp.log(2 * _sigma * sp.gamma(sp.Rational(1, beta))) - ((_x - _mu) / _sigma) ** beta
    params = (_mu, _sigma)
    s = [sp.diff(l, v) for v in params]
    h = [[sp.diff(l, a, b) for b in params] for a in params]
    return sp.lambdify((_x, _mu, _sigma), s), sp.lambdify((_x, _mu, _sigma), h)


class TestParameterPoint:
    def test_array_is_copy(self):
        pt = ParameterPoint((1.0, 2.0), "location-scale")
        a = pt.array
        a[0] = 9
        assert pt.coords[0] == 1.0

    def test_validation(self):
        fam = GeneralizedGaussianFamily(2)
        with pytest.raises(DomainError):
            fam.point(0.0, -1.0)
        with pytest.raises(DomainError):
            fam.point(0.0, 1.0, chart="natural")

    def test_with_coords(self):
        pt = GeneralizedGaussianFamily(4).point(0.0, 1.0)
        assert pt.with_coords([1.0, 2.0]).coords == (1.0, 2.0)


class TestLogDensity:
    def test_gaussian_at_mode(self):
        fam = GeneralizedGaussianFamily(2)
        assert log_density(fam, fam.point(0.0, 1.0), 0.0) == pytest.approx(-0.5 * math.log(math.pi), abs=1e-14)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_matches_scipy_gennorm(self, beta):
        fam = GeneralizedGaussianFamily(beta)
        xs = np.linspace(-2, 3, 11)
        got = log_density(fam, fam.point(0.5, 1.5), xs)
        np.testing.assert_allclose(got, stats.gennorm(beta, loc=0.5, scale=1.5).logpdf(xs), rtol=1e-13, atol=1e-13)

    def test_orthant_p1(self):
        fam = OrthantGaussianFamily(1)
        expected = math.log(2) - 0.5 * math.log(2 * math.pi) - 0.5
        assert log_density(fam, fam.point([1.0], chart="precision"), 1.0) == pytest.approx(expected, abs=1e-14)

    def test_orthant_outside_support(self):
        fam = OrthantGaussianFamily(2)
        with pytest.raises(SupportError):
            log_density(fam, fam.point([1.0, 1.0], chart="precision"), np.array([1.0, -1.0]))

    def test_orthant_negative_orthant_valid(self):
        fam = OrthantGaussianFamily(2)
        v = log_density(fam, fam.point([1.0, 1.0], chart="precision"), np.array([-1.0, -1.0]))
        assert v == pytest.approx(math.log(2) - math.log(2 * math.pi) - 1, abs=1e-14)


class TestScore:
    def test_gaussian_example(self):
        fam = GeneralizedGaussianFamily(2)
        np.testing.assert_allclose(score(fam, fam.point(0.0, 1.0), 1.0), [2.0, 1.0], atol=1e-14)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_at_location(self, beta):
        fam = GeneralizedGaussianFamily(beta)
        np.testing.assert_allclose(score(fam, fam.point(1.3, 0.7), 1.3), [0.0, -1 / 0.7], atol=1e-14)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_against_sympy(self, beta):
        s_fn, _ = sympy_derivatives(beta)
        fam = GeneralizedGaussianFamily(beta)
        for x, mu, sig in [(0.3, -0.2, 0.8), (2.0, 1.0, 1.7), (-1.1, 0.0, 0.5)]:
            np.testing.assert_allclose(score(fam, fam.point(mu, sig), x), s_fn(x, mu, sig), rtol=1e-12, atol=1e-12)

    @given(
        st.sampled_from([2, 4, 6]),
        st.floats(-1, 1),
        st.floats(0.5, 2),
        st.floats(-1.5, 1.5),
    )
    @settings(max_examples=60, deadline=None)
    def test_numeric_matches_analytic(self, beta, mu, sigma, z):
        fam = GeneralizedGaussianFamily(beta)
        pt = fam.point(mu, sigma)
        x = np.array([mu + sigma * z])
        analytic = fam._analytic_score(x, pt.array, pt.chart)[0]
        np.testing.assert_allclose(_numeric_score(fam, pt, x)[0], analytic, atol=1e-6)


class TestHessian:
    def test_gaussian_example(self):
        fam = GeneralizedGaussianFamily(2)
        np.testing.assert_allclose(log_density_hessian(fam, fam.point(0.0, 1.0), 1.0), [[-2, -4], [-4, -5]], atol=1e-13)

    def test_symmetric_exactly(self):
        fam = GaussianLocationFamily(analytic=False)
        h = log_density_hessian(GeneralizedGaussianFamily(4), GeneralizedGaussianFamily(4).point(0.2, 1.1), 0.9)
        assert h[0, 1] == h[1, 0]
        assert log_density_hessian(fam, fam.point(0.0), 0.5).shape == (1, 1)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_against_sympy(self, beta):
        _, h_fn = sympy_derivatives(beta)
        fam = GeneralizedGaussianFamily(beta)
        for x, mu, sig in [(0.3, -0.2, 0.8), (2.0, 1.0, 1.7)]:
            np.testing.assert_allclose(
                log_density_hessian(fam, fam.point(mu, sig), x), np.array(h_fn(x, mu, sig), dtype=float), rtol=1e-12, atol=1e-12
            )

    @given(st.sampled_from([2, 4, 6]), st.floats(-1, 1), st.floats(0.5, 2), st.floats(-1.5, 1.5))
    @settings(max_examples=60, deadline=None)
    def test_numeric_matches_analytic(self, beta, mu, sigma, z):
        fam = GeneralizedGaussianFamily(beta)
        pt = fam.point(mu, sigma)
        x = np.array([mu + sigma * z])
        np.testing.assert_allclose(_numeric_hessian(fam, pt, x)[0], fam._analytic_hessian(x, pt.array, pt.chart)[0], rtol=1e-6, atol=1e-5)

    def test_numeric_fallback_on_location_family(self):
        fam = GaussianLocationFamily(analytic=False)
        np.testing.assert_allclose(score(fam, fam.point(0.5), 2.0), [1.5], atol=1e-8)
        np.testing.assert_allclose(log_density_hessian(fam, fam.point(0.5), 2.0), [[-1.0]], atol=1e-5)


class TestExpect:
    def test_normalization_quadrature(self):
        fam = GeneralizedGaussianFamily(4)
        assert expect(QUAD, fam, fam.point(0.0, 1.0), lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-9)

    def test_normalization_monte_carlo_exact(self):
        fam = GeneralizedGaussianFamily(4)
        mc = ExpectationEngine.monte_carlo(1000, seed=3)
        assert expect(mc, fam, fam.point(0.0, 1.0), lambda x: np.ones_like(x)) == 1.0

    def test_shifted_second_moment(self):
        fam = GeneralizedGaussianFamily(4)
        val = expect(QUAD, fam, fam.point(3.0, 2.0), lambda x: (x - 3.0) ** 2)
        assert val == pytest.approx(stats.gennorm(4, loc=3, scale=2).var(), rel=1e-10)
        # quoted 1.3519576 is four times the rounded 0.3379894
        assert val == pytest.approx(1.3519576, abs=2e-6)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_odd_moment_vanishes(self, beta):
        fam = GeneralizedGaussianFamily(beta)
        assert abs(expect(QUAD, fam, fam.point(-0.4, 1.3), lambda x: (x + 0.4) ** 3)) <= 1e-9

    def test_closed_form_engine_rejected(self):
        fam = GeneralizedGaussianFamily(2)
        with pytest.raises(UnsupportedEngineError):
            expect(ExpectationEngine.closed_form(), fam, fam.point(0.0, 1.0), lambda x: x)

    @pytest.mark.parametrize("p", [2, 3])
    def test_orthant_odd_integrand(self, p):
        # E[x1 x2] over the orthant pair: x1 x2 > 0, so the mean is 2/(pi sqrt(l1 l2)) for p = 2.
        fam = OrthantGaussianFamily(p)
        lam = np.linspace(0.7, 1.9, p)
        val = expect(QUAD, fam, fam.point(lam, chart="precision"), lambda x: x[:, 0] * x[:, 1])
        if p == 2:
            assert val == pytest.approx(2 / (math.pi * math.sqrt(lam[0] * lam[1])), rel=1e-7)
        else:
            assert val == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_orthant_normalization_both_routes(self, p):
        fam = OrthantGaussianFamily(p)
        pt = fam.point(np.linspace(0.5, 2.0, p), chart="precision")
        one = lambda x: np.ones(np.shape(x)[0])
        assert expect(QUAD, fam, pt, one, even=True) == pytest.approx(1.0, abs=1e-8)
        assert expect(QUAD, fam, pt, one, even=False) == pytest.approx(1.0, abs=1e-8)

    def test_expect_with_error_quadrature_has_zero_se(self):
        fam = GeneralizedGaussianFamily(2)
        m, se = expect_with_error(QUAD, fam, fam.point(0.0, 1.0), lambda x: x**2)
        assert m == pytest.approx(0.5, abs=1e-12) and se == 0.0

    def test_monte_carlo_determinism(self):
        fam = OrthantGaussianFamily(2)
        pt = fam.point([1.0, 2.0], chart="precision")
        a = expectation_nodes(ExpectationEngine.monte_carlo(500, seed=11, stream_id=2), fam, pt)[0]
        b = expectation_nodes(ExpectationEngine.monte_carlo(500, seed=11, stream_id=2), fam, pt)[0]
        np.testing.assert_array_equal(a, b)

    def test_monte_carlo_mean_within_band(self):
        fam = GeneralizedGaussianFamily(6)
        n = 200_000
        m, se = expect_with_error(ExpectationEngine.monte_carlo(n, seed=5), fam, fam.point(0.0, 1.0), lambda x: x**2)
        assert abs(m - stats.gennorm(6).var()) <= 4 * se


@pytest.mark.parametrize("beta", [2, 4, 6])
@pytest.mark.parametrize("mu", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
class TestGridIdentities:
    def test_score_identity_and_bartlett(self, beta, mu, sigma):
        fam = GeneralizedGaussianFamily(beta)
        m = score_moments(fam, fam.point(mu, sigma), QUAD)
        assert abs(m.normalization - 1) <= 1e-8
        assert np.max(np.abs(m.mean_score)) <= 1e-7
        np.testing.assert_allclose(m.metric, m.outer, atol=1e-6)
