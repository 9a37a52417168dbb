import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from alphageom.core import ExpectationEngine
from alphageom.errors import UnsupportedEngineError
from alphageom.families import GaussianLocationFamily, GeneralizedGaussianFamily, OrthantGaussianFamily
from alphageom.geometry import (
    AlphaCurvature,
    alpha_connection,
    curvature_report,
    curvature_tensor,
    fisher_metric,
    fisher_metric_outer,
    gaussian_curvature,
    is_alpha_flat,
    levi_civita,
    one_connection,
    raise_connection,
    score_moments,
    skewness_tensor,
)
from alphageom.tensors import MetricTensor, Tensor3

import oracles

QUAD = ExpectationEngine.quadrature()
GG = {b: GeneralizedGaussianFamily(b) for b in (2, 4, 6)}


def gg_pt(beta, mu=0.0, sigma=1.0):
    return GG[beta].point(mu, sigma)


def levi_civita_oracle(beta, mu, sigma):
    """Christoffel symbols of diag(c11, c22)/sigma^2, c from adaptive quadrature."""
    g0 = oracles.gg_tensors(beta)[0]
    g = sp.diag(sp.Float(g0[0, 0], 17), sp.Float(g0[1, 1], 17)) / oracles.sigma_**2
    gam = oracles.christoffel_first_kind(g, (oracles.mu_, oracles.sigma_))
    sub = {oracles.mu_: mu, oracles.sigma_: sigma}
    return np.array([[[float(gam[i][j][k].subs(sub)) for k in range(2)] for j in range(2)] for i in range(2)])


class TestFisherMetric:
    def test_gaussian_unit_scale(self):
        np.testing.assert_allclose(fisher_metric(GG[2], gg_pt(2), QUAD).components, np.diag([2.0, 2.0]), atol=1e-6)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    @pytest.mark.parametrize("mu,sigma", [(-1.0, 0.5), (0.0, 1.0), (1.0, 2.0)])
    def test_off_diagonal_vanishes(self, beta, mu, sigma):
        assert abs(fisher_metric(GG[beta], gg_pt(beta, mu, sigma), QUAD).components[0, 1]) <= 1e-8

    @pytest.mark.parametrize("beta", [4, 6])
    def test_against_adaptive_quadrature(self, beta):
        g_ref = oracles.gg_tensors(beta)[0]
        np.testing.assert_allclose(fisher_metric(GG[beta], gg_pt(beta), QUAD).components, g_ref, rtol=1e-6, atol=1e-8)

    def test_orthant_p1_is_chi_square_variance(self):
        fam = OrthantGaussianFamily(1)
        g = fisher_metric(fam, fam.point([-0.5], chart="natural"), QUAD)
        assert g.components[0, 0] == pytest.approx(stats.chi2(1).var(), abs=1e-7)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_two_routes_agree(self, beta):
        pt = gg_pt(beta, 0.3, 1.4)
        np.testing.assert_allclose(
            fisher_metric(GG[beta], pt, QUAD).components, fisher_metric_outer(GG[beta], pt, QUAD).components, atol=1e-6
        )

    def test_closed_form_engine_uses_family_closed_forms(self):
        g = fisher_metric(GG[4], gg_pt(4, 0.0, 2.0), ExpectationEngine.closed_form())
        np.testing.assert_allclose(g.components, oracles.gg_tensors(4)[0] / 4, rtol=1e-10)

    def test_monte_carlo_within_band(self):
        m = score_moments(GG[2], gg_pt(2), ExpectationEngine.monte_carlo(200_000, seed=7))
        assert np.all(np.abs(m.metric - np.diag([2.0, 2.0])) <= 4 * m.stderr["metric"] + 1e-12)


class TestSkewnessTensor:
    def test_t222_gaussian(self):
        assert skewness_tensor(GG[2], gg_pt(2), QUAD)[1, 1, 1] == pytest.approx(8.0, abs=1e-6)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_declared_zeros(self, beta):
        t = skewness_tensor(GG[beta], gg_pt(beta, 0.5, 1.5), QUAD).components
        for idx in [(0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)]:
            assert abs(t[idx]) <= 1e-8

    def test_t112_beta4_gamma_expression(self):
        expected = (math.gamma(11 / 4) * 64 - math.gamma(7 / 4) * 16) / math.gamma(1 / 4)
        assert skewness_tensor(GG[4], gg_pt(4), QUAD)[0, 0, 1] == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_against_adaptive_quadrature(self, beta):
        t_ref = oracles.gg_tensors(beta)[1]
        np.testing.assert_allclose(skewness_tensor(GG[beta], gg_pt(beta), QUAD).components, t_ref, rtol=1e-6, atol=1e-8)

    def test_fully_symmetric(self):
        assert skewness_tensor(GG[6], gg_pt(6, -0.4, 0.8), QUAD).symmetry_defect() <= 1e-9


class TestOneConnection:
    def test_g222_closed_form_value(self):
        """Closed-form -beta(beta-1)/sigma^3 = -2 at beta = 2.

        Expected to fail: E[d2l/dsigma2 dl/dsigma] is -beta(beta+1) = -6;
        see test_g222_against_adaptive_quadrature.
        """
        assert one_connection(GG[2], gg_pt(2), QUAD)[1, 1, 1] == pytest.approx(-2.0, abs=1e-6)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_g222_against_adaptive_quadrature(self, beta):
        ref = oracles.gg_tensors(beta)[2][1, 1, 1]
        assert ref == pytest.approx(-beta * (beta + 1), abs=1e-8)
        assert one_connection(GG[beta], gg_pt(beta), QUAD)[1, 1, 1] == pytest.approx(ref, abs=1e-6)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_declared_zeros(self, beta):
        c = one_connection(GG[beta], gg_pt(beta, -1.0, 2.0), QUAD).components
        for idx in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]:
            assert abs(c[idx]) <= 1e-8

    def test_g121_beta4_sigma2(self):
        expected = -math.gamma(7 / 4) * 64 / (8 * math.gamma(1 / 4))
        assert one_connection(GG[4], gg_pt(4, 0.0, 2.0), QUAD)[0, 1, 0] == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("beta", [4, 6])
    def test_against_adaptive_quadrature(self, beta):
        ref = oracles.gg_tensors(beta)[2]
        np.testing.assert_allclose(one_connection(GG[beta], gg_pt(beta), QUAD).components, ref, rtol=1e-6, atol=1e-8)

    def test_symmetric_in_first_pair(self):
        assert one_connection(GG[4], gg_pt(4, 0.2, 0.7), QUAD).symmetry_defect() <= 1e-9


class TestAlphaConnection:
    def setup_method(self):
        self.g1 = one_connection(GG[2], gg_pt(2), QUAD)
        self.t = skewness_tensor(GG[2], gg_pt(2), QUAD)

    def test_alpha_one_returns_one_connection(self):
        np.testing.assert_array_equal(alpha_connection(self.g1, self.t, 1.0).components, self.g1.components)

    def test_alpha_minus_one_adds_skewness(self):
        np.testing.assert_allclose(
            alpha_connection(self.g1, self.t, -1.0).components, self.g1.components + self.t.components, rtol=1e-15
        )

    def test_g222_alpha0_closed_form_value(self):
        """-2 + 4 = 2 built from the closed-form 1-connection.

        Expected to fail: with the moment value -6 the component is -2,
        which is what the metric connection gives (next test).
        """
        assert alpha_connection(self.g1, self.t, 0.0)[1, 1, 1] == pytest.approx(2.0, abs=1e-6)

    def test_alpha0_matches_christoffel_oracle(self):
        np.testing.assert_allclose(
            alpha_connection(self.g1, self.t, 0.0).components, levi_civita_oracle(2, 0.0, 1.0), atol=1e-6
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            alpha_connection(self.g1, Tensor3(np.zeros((3, 3, 3)), "full"), 0.0)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=50, deadline=None)
    def test_affine_in_alpha(self, a, b):
        ga = alpha_connection(self.g1, self.t, a).components
        gb = alpha_connection(self.g1, self.t, b).components
        np.testing.assert_allclose(gb - ga, 0.5 * (a - b) * self.t.components, atol=1e-12)


class TestRaiseConnection:
    conn = Tensor3(np.arange(8.0).reshape(2, 2, 2), "none")

    def test_identity_metric(self):
        np.testing.assert_allclose(raise_connection(self.conn, MetricTensor(np.eye(2))).components, self.conn.components)

    def test_diagonal_two(self):
        out = raise_connection(self.conn, MetricTensor(2 * np.eye(2)))
        np.testing.assert_allclose(out.components, 0.5 * self.conn.components)
        assert out.raised

    def test_gaussian_alpha0_closed_form_value(self):
        """g^22 Gamma^(0)_222 = 1/2 * 2 = 1 from the closed-form 1-connection.

        Expected to fail: the moment-based value is 1/2 * (-2) = -1.
        """
        g1, t = one_connection(GG[2], gg_pt(2), QUAD), skewness_tensor(GG[2], gg_pt(2), QUAD)
        up = raise_connection(alpha_connection(g1, t, 0.0), fisher_metric(GG[2], gg_pt(2), QUAD))
        assert up[1, 1, 1] == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_alpha0_against_oracle(self):
        g1, t = one_connection(GG[2], gg_pt(2), QUAD), skewness_tensor(GG[2], gg_pt(2), QUAD)
        up = raise_connection(alpha_connection(g1, t, 0.0), fisher_metric(GG[2], gg_pt(2), QUAD))
        assert up[1, 1, 1] == pytest.approx(levi_civita_oracle(2, 0.0, 1.0)[1, 1, 1] / 2.0, abs=1e-6)

    def test_already_raised_rejected(self):
        up = raise_connection(self.conn, MetricTensor(np.eye(2)))
        with pytest.raises(ValueError):
            raise_connection(up, MetricTensor(np.eye(2)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            raise_connection(self.conn, MetricTensor(np.eye(3)))

    @given(st.lists(st.floats(0.2, 5.0), min_size=3, max_size=3), st.floats(-0.9, 0.9))
    @settings(max_examples=40, deadline=None)
    def test_lowering_inverts(self, d, rho):
        a = np.diag(d[:2])
        a[0, 1] = a[1, 0] = rho * math.sqrt(d[0] * d[1])
        g = MetricTensor(a)
        up = raise_connection(self.conn, g).components
        np.testing.assert_allclose(np.einsum("ijk,km->ijm", up, a), self.conn.components, atol=1e-9)


class TestLeviCivita:
    def test_constant_metric_family(self):
        fam = GaussianLocationFamily()
        assert np.max(np.abs(levi_civita(fam, fam.point(0.3), QUAD).components)) <= 1e-8

    def test_equals_alpha0_gaussian(self):
        pt = gg_pt(2)
        lc = levi_civita(GG[2], pt, QUAD).components
        a0 = alpha_connection(one_connection(GG[2], pt, QUAD), skewness_tensor(GG[2], pt, QUAD), 0.0).components
        np.testing.assert_allclose(lc, a0, atol=1e-5)

    def test_orthant_p1(self):
        fam = OrthantGaussianFamily(1)
        assert levi_civita(fam, fam.point([-0.5], chart="natural"), QUAD)[0, 0, 0] == pytest.approx(4.0, abs=1e-5)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    @pytest.mark.parametrize("mu,sigma", [(0.0, 1.0), (-1.0, 0.7), (0.5, 1.8)])
    def test_against_christoffel_oracle(self, beta, mu, sigma):
        lc = levi_civita(GG[beta], gg_pt(beta, mu, sigma), QUAD).components
        np.testing.assert_allclose(lc, levi_civita_oracle(beta, mu, sigma), atol=5e-5)

    @pytest.mark.parametrize("p", [2, 3])
    def test_orthant_matches_alpha0(self, p):
        fam = OrthantGaussianFamily(p)
        pt = fam.point(np.linspace(0.6, 1.6, p), chart="precision")
        lc = levi_civita(fam, pt, QUAD).components
        a0 = alpha_connection(one_connection(fam, pt, QUAD), skewness_tensor(fam, pt, QUAD), 0.0).components
        np.testing.assert_allclose(lc, a0, atol=5e-5)


class TestCurvatureTensor:
    def test_r1212_gaussian_alpha0(self):
        assert curvature_tensor(GG[2], gg_pt(2), 0.0, QUAD)[0, 1, 0, 1] == pytest.approx(-2.0, abs=2e-3)

    def test_orthant_natural_alpha1_vanishes(self):
        fam = OrthantGaussianFamily(2)
        assert curvature_tensor(fam, fam.point([-0.5, -1.0], chart="natural"), 1.0, QUAD).max_abs <= 1e-6

    @pytest.mark.parametrize(
        "fam,pt",
        [
            (GG[2], gg_pt(2)),
            (GG[6], gg_pt(6, 0.4, 1.3)),
            (OrthantGaussianFamily(2), OrthantGaussianFamily(2).point([1.0, 2.0], chart="precision")),
        ],
    )
    @pytest.mark.parametrize("alpha", [-1.0, 0.0, 0.5])
    def test_antisymmetric_first_pair(self, fam, pt, alpha):
        assert curvature_tensor(fam, pt, alpha, QUAD).antisymmetry_defect() <= 1e-8

    @pytest.mark.parametrize("beta", [2, 4, 6])
    @pytest.mark.parametrize("alpha", [-1.0, 0.0, 1 / 3, 0.5, 1.0])
    def test_r1212_against_symbolic_oracle(self, beta, alpha):
        expr, _ = oracles.gg_alpha_curvature_1212(beta)
        ref = float(expr.subs({oracles.alpha_: alpha, oracles.sigma_: 1.3}))
        got = curvature_tensor(GG[beta], gg_pt(beta, -0.5, 1.3), alpha, QUAD)[0, 1, 0, 1]
        assert got == pytest.approx(ref, abs=2e-3)

    @pytest.mark.parametrize("beta", [2, 4])
    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_dual_identity(self, beta, alpha):
        ac = AlphaCurvature(GG[beta], gg_pt(beta, 0.2, 0.9), QUAD)
        r, r_dual = ac.tensor(alpha).components, ac.tensor(-alpha).components
        np.testing.assert_allclose(r, -r_dual.transpose(0, 1, 3, 2), atol=5e-4)

    def test_report_fields(self):
        rep = curvature_report(GG[4], gg_pt(4), 0.0, QUAD)
        assert rep.gaussian_curvature == pytest.approx(-0.25, abs=2e-3)
        assert rep.max_abs_component == rep.tensor.max_abs
        fam = OrthantGaussianFamily(3)
        assert curvature_report(fam, fam.point([1.0, 1.0, 1.0], chart="precision"), 0.0, QUAD).gaussian_curvature is None


class TestGaussianCurvature:
    @pytest.mark.parametrize("beta,expected", [(2, -0.5), (4, -0.25), (6, -1 / 6)])
    def test_alpha0_values(self, beta, expected):
        ac = AlphaCurvature(GG[beta], gg_pt(beta), QUAD)
        assert ac.gaussian_curvature(0.0) == pytest.approx(expected, abs=2e-3)

    @pytest.mark.parametrize("beta", [2, 4, 6])
    def test_alpha0_brioschi_oracle(self, beta):
        g0 = oracles.gg_tensors(beta)[0]
        k = oracles.brioschi_curvature(g0[0, 0] / oracles.sigma_**2, g0[1, 1] / oracles.sigma_**2, oracles.mu_, oracles.sigma_)
        ac = AlphaCurvature(GG[beta], gg_pt(beta, 1.0, 0.6), QUAD)
        assert ac.gaussian_curvature(0.0) == pytest.approx(float(k), abs=2e-3)

    def test_requires_two_dimensions(self):
        fam = OrthantGaussianFamily(3)
        ac = AlphaCurvature(fam, fam.point([1.0, 1.5, 2.0], chart="precision"), QUAD)
        with pytest.raises(UnsupportedEngineError):
            gaussian_curvature(ac.tensor(0.0), ac.metric)


class TestIsAlphaFlat:
    def test_orthant_p2_alpha0(self):
        fam = OrthantGaussianFamily(2)
        grid = [fam.point([a, b], chart="precision") for a in (0.5, 1.25, 2.0) for b in (0.5, 1.25, 2.0)]
        assert is_alpha_flat(fam, 0.0, grid, 1e-5, QUAD).flat

    def test_gg_beta4_alpha_one_third(self):
        """Closed-form flat root 1/(beta-1) at beta = 4.

        Expected to fail: only R_1212 vanishes there. For a non-metric
        connection R_1221 = -R^(-alpha)_1212, which is nonzero at
        alpha = -1/3 (see test_gg_beta4_alpha_one_third_components).
        """
        grid = [gg_pt(4, m, s) for m in (-1.0, 0.0, 1.0) for s in (0.5, 1.0, 2.0)]
        assert is_alpha_flat(GG[4], 1 / 3, grid, 1e-4, QUAD).flat

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_gg_beta4_alpha_one_third_components(self, sigma):
        expr, _ = oracles.gg_alpha_curvature_1212(4)
        r = curvature_tensor(GG[4], gg_pt(4, 0.0, sigma), 1 / 3, QUAD).components
        assert abs(r[0, 1, 0, 1]) <= 1e-4
        dual = float(expr.subs({oracles.alpha_: -1 / 3, oracles.sigma_: sigma}))
        assert r[0, 1, 1, 0] == pytest.approx(-dual, abs=2e-3)
        assert abs(r[0, 1, 1, 0]) > 0.3

    def test_gg_beta2_dually_flat_pair(self):
        grid = [gg_pt(2, m, s) for m in (-1.0, 1.0) for s in (0.5, 2.0)]
        assert is_alpha_flat(GG[2], [-1.0, 1.0], grid, 1e-4, QUAD).flat

    def test_gg_beta4_alpha0_not_flat(self):
        grid = [gg_pt(4, m, s) for m in (-1.0, 0.0, 1.0) for s in (0.5, 1.0, 2.0)]
        v = is_alpha_flat(GG[4], 0.0, grid, 1e-4, QUAD)
        assert not v.flat
        r = curvature_tensor(GG[4], v.worst_point, 0.0, QUAD)
        assert v.max_abs == pytest.approx(abs(r[0, 1, 0, 1]), rel=1e-9)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            is_alpha_flat(GG[2], 0.0, [], 1e-5, QUAD)
