import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heralded_fock.detector import (
    DetectorConfig,
    click_table,
    det_prob,
    det_prob_exact,
    det_prob_ideal_limit,
    det_response_band,
)


class TestDetectorConfig:
    def test_bins_derived(self):
        assert DetectorConfig(5, 0.66).bins == 32
        assert DetectorConfig(0, 0.5).bins == 1

    def test_efficiency_range(self):
        with pytest.raises(ValueError):
            DetectorConfig(3, 0.0)
        with pytest.raises(ValueError):
            DetectorConfig(3, 1.2)
        with pytest.raises(ValueError):
            DetectorConfig(-1, 0.5)

    def test_from_bins(self):
        cfg = DetectorConfig.from_bins(32, Fraction(33, 50))
        assert cfg.stages == 5
        assert cfg.efficiency_ratio == Fraction(33, 50)
        with pytest.raises(ValueError):
            DetectorConfig.from_bins(12, 0.5)

    def test_ratio_consistency_check(self):
        with pytest.raises(ValueError):
            DetectorConfig(3, 0.5, efficiency_ratio=Fraction(1, 3))


class TestDetProb:
    def test_two_photons_two_bins(self):
        # 4 equally likely bin assignments; 2 put the photons in distinct bins
        assert det_prob(DetectorConfig(1, 1.0), 2, 2) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("m,eta,N", [(3, 0.3, 7), (5, 0.66, 12), (2, 0.9, 4)])
    def test_zero_clicks_is_total_loss(self, m, eta, N):
        assert det_prob(DetectorConfig(m, eta), 0, N) == pytest.approx(
            (1 - eta) ** N, rel=1e-13
        )

    def test_exact_oracle_medium_case(self):
        cfg = DetectorConfig.from_bins(32, Fraction(33, 50))
        assert det_prob(cfg, 3, 5) == pytest.approx(
            float(det_prob_exact(cfg, 3, 5)), abs=1e-12
        )

    def test_clicks_beyond_bins_rejected(self):
        with pytest.raises(ValueError):
            det_prob(DetectorConfig(1, 0.5), 3, 5)

    def test_n_ceiling(self):
        with pytest.raises(ValueError):
            det_prob(DetectorConfig(5, 0.5), 2, 10_001)

    def test_zero_above_photon_number(self):
        assert det_prob(DetectorConfig(3, 0.7), 4, 2) == 0.0

    @given(
        m=st.integers(0, 5),
        eta=st.floats(0.05, 1.0),
        N=st.integers(0, 60),
    )
    @settings(max_examples=80, deadline=None)
    def test_normalization(self, m, eta, N):
        cfg = DetectorConfig(m, eta)
        total = math.fsum(det_prob(cfg, n, N) for n in range(cfg.bins + 1))
        assert abs(total - 1.0) <= 1e-12

    def test_normalization_deep(self):
        # N up to 200 on the workhorse detector
        cfg = DetectorConfig(5, 0.33)
        for N in (50, 120, 200):
            total = math.fsum(det_prob(cfg, n, N) for n in range(33))
            assert abs(total - 1.0) <= 1e-12


class TestExactOracleEquivalence:
    @pytest.mark.parametrize("bins", [2, 4, 8])
    @pytest.mark.parametrize("eta", [Fraction(1), Fraction(1, 2), Fraction(33, 50)])
    def test_matches_enumeration(self, bins, eta):
        cfg = DetectorConfig.from_bins(bins, eta)
        for N in range(7):
            for n in range(min(N, bins) + 1):
                exact = float(det_prob_exact(cfg, n, N))
                assert det_prob(cfg, n, N) == pytest.approx(exact, abs=1e-12)


class TestIdealLimit:
    def test_lossless_is_exact(self):
        assert det_prob_ideal_limit(1.0, 4, 4) == 1.0

    def test_half_efficiency(self):
        assert det_prob_ideal_limit(0.5, 1, 2) == pytest.approx(0.5)

    def test_binomial_value(self):
        expected = math.comb(5, 3) * 0.34**2 * 0.66**3
        assert det_prob_ideal_limit(0.66, 3, 5) == pytest.approx(expected, rel=1e-15)

    def test_convergence_of_full_model(self):
        # eta small enough that the residual bin-collision effect at M=2^20
        # stays below 1e-6; at eta near 1 the true finite-M gap is larger.
        cfg = DetectorConfig(20, 0.33)
        for N in range(11):
            for n in range(N + 1):
                assert abs(
                    det_prob(cfg, n, N) - det_prob_ideal_limit(0.33, n, N)
                ) <= 1e-6

    def test_gap_shrinks_inversely_with_bins(self):
        gaps = []
        for m in (14, 17, 20):
            cfg = DetectorConfig(m, 1.0)
            gaps.append(
                max(
                    abs(det_prob(cfg, n, N) - det_prob_ideal_limit(1.0, n, N))
                    for N in range(11)
                    for n in range(N + 1)
                )
            )
        # three extra stages = 8x more bins; the gap should track 1/M
        assert gaps[1] < gaps[0] / 4
        assert gaps[2] < gaps[1] / 4


class TestClickTable:
    @given(m=st.integers(0, 5), eta=st.floats(0.05, 1.0), N=st.integers(0, 30))
    @settings(max_examples=60, deadline=None)
    def test_agrees_with_direct_sum(self, m, eta, N):
        cfg = DetectorConfig(m, eta)
        T = click_table(cfg, N)
        for n in range(min(N, cfg.bins) + 1):
            assert T[N, n] == pytest.approx(det_prob(cfg, n, N), abs=1e-12)

    def test_rows_normalized(self):
        T = click_table(DetectorConfig(5, 0.66), 200)
        assert np.allclose(T.sum(axis=1), 1.0, atol=1e-12)


class TestResponseBand:
    def test_single_photon_lossless(self):
        band = det_response_band(DetectorConfig(5, 1.0), 1)
        N, mean, std = band[1]
        assert (N, mean) == (1, pytest.approx(1.0))
        assert std == pytest.approx(0.0, abs=1e-7)

    def test_saturation_below_bins(self):
        band = det_response_band(DetectorConfig(5, 1.0), 400)
        means = [m for _, m, _ in band]
        assert means[-1] < 32.0
        assert means[-1] > 31.0  # deep saturation approaches the bin count

    def test_mean_nondecreasing(self):
        for eta in (0.33, 0.66, 1.0):
            band = det_response_band(DetectorConfig(5, eta), 150)
            means = [m for _, m, _ in band]
            assert all(b >= a for a, b in zip(means, means[1:]))

    def test_initial_slope_roughly_eta(self):
        for eta in (0.33, 0.66, 1.0):
            band = det_response_band(DetectorConfig(5, eta), 5)
            ns = np.arange(1, 6)
            means = np.array([band[N][1] for N in ns])
            slope = np.polyfit(ns, means, 1)[0]
            assert slope == pytest.approx(eta, rel=0.10)

    def test_mean_matches_mc_oracle(self):
        from heralded_fock.mc import McConfig, simulate_detection
        from heralded_fock.source import SourceConfig

        det = DetectorConfig(5, 0.33)
        cfg = McConfig(trials=10**6, seed=123, det=det, src=SourceConfig(1.0))
        emp = simulate_detection(cfg, 10)
        _, mean, std = det_response_band(det, 10)[10]
        se = std / math.sqrt(cfg.trials)
        assert abs(emp.mean() - mean) <= 3 * se
