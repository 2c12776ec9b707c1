import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heralded_fock.closed_form import (
    AppendixContext,
    a_coeff,
    appendix_context,
    appendix_sums,
    beta_pf,
    cond_mean_single,
    cond_moments_multimode,
    cond_var_single,
    g_mu,
    g_mu_derivative,
)
from heralded_fock.detector import DetectorConfig
from heralded_fock.herald import _herald_weights, cond_moments_direct
from heralded_fock.source import SourceConfig

GRID_G = (0.1, 0.25, 0.75, 1.0)
GRID_ETA = (0.33, 0.66, 1.0)
GRID_M = (8, 32)


def close(a, b, rel=1e-8):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


class TestACoeff:
    def test_lossless_vacuum(self):
        det = DetectorConfig(3, 1.0)
        assert a_coeff(det, SourceConfig(0.7), 0, 0) == 1.0

    def test_small_gain_approaches_one(self):
        det = DetectorConfig(5, 0.5)
        for j in range(4):
            assert a_coeff(det, SourceConfig(1e-4), 3, j) == pytest.approx(1.0, abs=1e-7)

    def test_single_bin_value(self):
        det = DetectorConfig(0, 0.5)
        t = math.tanh(1.0) ** 2
        assert a_coeff(det, SourceConfig(1.0), 0, 0) == pytest.approx(
            1 / (1 - 0.5 * t), rel=1e-14
        )

    def test_at_least_one_on_grid(self):
        for g in GRID_G:
            for eta in GRID_ETA:
                for bins in GRID_M:
                    det = DetectorConfig.from_bins(bins, eta)
                    src = SourceConfig(g)
                    for n_i in range(7):
                        for j in range(n_i + 1):
                            a = a_coeff(det, src, n_i, j)
                            assert a >= 1.0
                            lossless = eta == 1.0 and n_i == j
                            assert (a == 1.0) == lossless


class TestSingleModeClosedForms:
    def test_lossless_vacuum_moments(self):
        det = DetectorConfig(3, 1.0)
        src = SourceConfig(0.8)
        assert cond_mean_single(det, src, 0) == 0.0
        assert cond_var_single(det, src, 0) == 0.0

    def test_single_bin_geometric_posterior(self):
        # With M=1 and n_i=0 the posterior is geometric with ratio t(1-eta);
        # its mean and variance are hand-derivable.
        det = DetectorConfig(0, 0.5)
        src = SourceConfig(1.0)
        t = math.tanh(1.0) ** 2
        rho = t * 0.5
        mean = rho / (1 - rho)
        assert cond_mean_single(det, src, 0) == pytest.approx(mean, rel=1e-14)
        a0 = 1 / (1 - rho)
        assert cond_var_single(det, src, 0) == pytest.approx(a0 * a0 - a0, rel=1e-14)
        # and the direct-summation oracle agrees
        dm, dv = cond_moments_direct(det, src, 0)
        assert close(dm, mean, rel=1e-10)
        assert close(dv, a0 * a0 - a0, rel=1e-10)

    def test_matches_direct_oracle_on_grid(self):
        for g in GRID_G:
            src = SourceConfig(g)
            for eta in GRID_ETA:
                for bins in GRID_M:
                    det = DetectorConfig.from_bins(bins, eta)
                    for n_i in range(7):
                        dm, dv = cond_moments_direct(det, src, n_i)
                        assert close(cond_mean_single(det, src, n_i), dm)
                        assert close(cond_var_single(det, src, n_i), dv)
                        assert cond_var_single(det, src, n_i) >= 0.0


class TestBetaPartialFractions:
    def test_trivial_inverse(self):
        form = beta_pf(0)
        assert form.eval(Fraction(3)) == Fraction(1, 3)

    def test_one_photon_identity(self):
        # 1/x - 1/(x+1) = 1/(x(x+1)); B(2,2) = 1/6
        assert beta_pf(1).eval(Fraction(2)) == Fraction(1, 6)

    def test_two_photon_gamma_value(self):
        # B(2,3) = Gamma(2)Gamma(3)/Gamma(5) = 1/12
        assert beta_pf(2).eval(Fraction(2)) == Fraction(1, 12)

    @given(n_i=st.integers(0, 8), x=st.floats(0.5, 50.0))
    @settings(max_examples=60, deadline=None)
    def test_matches_gamma_evaluation(self, n_i, x):
        lhs = float(beta_pf(n_i).eval(Fraction(x)))
        rhs = math.exp(
            math.lgamma(x) + math.lgamma(1 + n_i) - math.lgamma(x + 1 + n_i)
        )
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_derivative_is_exact_term_by_term(self):
        form = beta_pf(1)
        d = form.derivative()
        assert d.power == 2
        # d/dx [1/x - 1/(x+1)] = -1/x^2 + 1/(x+1)^2 at x=2: -1/4 + 1/9
        assert d.eval(Fraction(2)) == Fraction(-1, 4) + Fraction(1, 9)


class TestGMu:
    def test_vacuum_ratio(self):
        ctx = AppendixContext(x=3.0, b=0.0, c=0.0, A=1.0, mu=1, n_i=0)
        assert g_mu(ctx) == pytest.approx(-1.0 / 3.0, rel=1e-14)

    def test_one_click_rational_value(self):
        # B = 1/(x(x+1)); B'/B = -(2x+1)/(x(x+1)) = -5/6 at x=2
        ctx = AppendixContext(x=2.0, b=0.0, c=0.0, A=1.0, mu=1, n_i=1)
        assert g_mu(ctx) == pytest.approx(float(Fraction(-5, 6)), rel=1e-14)

    def test_multimode_value_is_finite(self):
        det = DetectorConfig(5, 0.66)
        ctx = appendix_context(det, SourceConfig(1.0, 5), 4)
        assert math.isfinite(g_mu(ctx))

    def test_derivative_matches_finite_difference(self):
        for mu in (1, 2, 5):
            for n_i in (0, 2, 4):
                det = DetectorConfig(5, 0.66)
                src = SourceConfig(0.9, mu)
                ctx = appendix_context(det, src, n_i)
                h = 1e-5 * ctx.x
                up = AppendixContext(ctx.x + h, ctx.b, ctx.c, ctx.A, mu, n_i)
                dn = AppendixContext(ctx.x - h, ctx.b, ctx.c, ctx.A, mu, n_i)
                fd = (g_mu(up) - g_mu(dn)) / (2 * h)
                assert g_mu_derivative(ctx) == pytest.approx(fd, rel=1e-6)


class TestMultimodeClosedForms:
    def test_reduces_to_single_mode(self):
        for g in GRID_G:
            src = SourceConfig(g, 1)
            for eta in GRID_ETA:
                for bins in GRID_M:
                    det = DetectorConfig.from_bins(bins, eta)
                    for n_i in range(7):
                        mm, mv = cond_moments_multimode(det, src, n_i)
                        sm = cond_mean_single(det, src, n_i)
                        sv = cond_var_single(det, src, n_i)
                        assert math.isclose(mm, sm, rel_tol=1e-10, abs_tol=1e-12)
                        assert math.isclose(mv, sv, rel_tol=1e-10, abs_tol=1e-12)

    @pytest.mark.parametrize("mu", [1, 2, 5])
    def test_matches_direct_oracle_on_grid(self, mu):
        for g in GRID_G:
            src = SourceConfig(g, mu)
            for eta in GRID_ETA:
                for bins in GRID_M:
                    det = DetectorConfig.from_bins(bins, eta)
                    for n_i in range(7):
                        dm, dv = cond_moments_direct(det, src, n_i)
                        mm, mv = cond_moments_multimode(det, src, n_i)
                        assert close(mm, dm)
                        assert close(mv, dv)
                        assert mv >= 0.0

    def test_vacuum_limit(self):
        det = DetectorConfig(5, 0.66)
        for g in (0.05, 0.01):
            mean, _ = cond_moments_multimode(det, SourceConfig(g, 5), 0)
            assert 0 <= mean < 5 * math.sinh(g) ** 2 * 1.01


class TestAppendixSums:
    @pytest.mark.parametrize("mu", [1, 2, 5])
    @pytest.mark.parametrize("n_i", [0, 2, 4])
    def test_match_direct_summation(self, mu, n_i):
        det = DetectorConfig(5, 0.66)
        src = SourceConfig(1.0, mu)
        w, total, _ = _herald_weights(det, src, n_i, rel_eps=1e-18)
        ks = np.arange(n_i, n_i + w.size, dtype=float)
        s0, s1, s2 = appendix_sums(det, src, n_i)
        assert close(s0, total)
        assert close(s1, float(ks @ w))
        assert close(s2, float((ks * ks) @ w))

    def test_s0_is_herald_probability(self):
        from heralded_fock.herald import herald_probability

        det = DetectorConfig(5, 0.33)
        src = SourceConfig(0.75, 2)
        s0, _, _ = appendix_sums(det, src, 3)
        assert close(s0, herald_probability(det, src, 3))
