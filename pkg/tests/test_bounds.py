import numpy as np
import pytest

from twqkd import bounds
from twqkd.attacks import (
    AttackParameters,
    attack_covariance,
    kappa_f_range,
    optimal_attack_point,
    stationary_minimum_bound,
)
from twqkd.bounds import (
    Theorem2Parameters,
    chi_E,
    chi_E_prime,
    convexity_scan,
    entropy_gain,
    first_order_check,
    min_entropy_gain,
)
from twqkd.channels import ChannelModel, EncodingSpec
from twqkd.gaussian import (
    NumericalError,
    SourceSpec,
    direct_sum,
    g_entropy,
    state_entropy,
    thermal_covariance,
    tmsv_covariance,
    vacuum_covariance,
)

from conftest import random_attack_params, random_channel

HALF_PI = np.pi / 2
SRC = SourceSpec(0.1)
ENC0 = EncodingSpec(0.0)
AMP = ChannelModel.amplifier(1.5)
LOSS = ChannelModel.loss(0.2)
CONTRA = ChannelModel.contra_amplifier(1.5)


class TestEntropyGain:
    def test_identity_channel_on_source(self):
        bd = entropy_gain(tmsv_covariance(SRC), ChannelModel.amplifier(1.0))
        assert bd.gain_bits == pytest.approx(g_entropy(0.1), abs=1e-12)

    def test_full_transmission_loss(self):
        cov = attack_covariance(SRC, AttackParameters(0.6, 0.5, HALF_PI, HALF_PI, 0.0))
        bd = entropy_gain(cov, ChannelModel.loss(1.0))
        want = state_entropy(direct_sum(vacuum_covariance(1), cov.select_modes([1]))) - state_entropy(cov)
        assert bd.gain_bits == pytest.approx(want, abs=1e-12)

    def test_loss_on_full_intrusion(self):
        bd = entropy_gain(tmsv_covariance(SRC), LOSS)
        assert bd.gain_bits == pytest.approx(g_entropy(0.2 * 0.1), abs=1e-12)

    def test_breakdown_identity(self, rng):
        from twqkd.gaussian import _g_clipped

        for _ in range(10):
            cov = attack_covariance(SRC, random_attack_params(rng, SRC))
            bd = entropy_gain(cov, random_channel(rng))
            recomputed = np.sum(_g_clipped((bd.nu - 1.0) / 2.0)) - np.sum(
                _g_clipped((bd.mu - 1.0) / 2.0)
            )
            assert bd.gain_bits == pytest.approx(float(recomputed), abs=1e-12)


class TestMinEntropyGain:
    def test_collapsed_feasible_set(self):
        res = min_entropy_gain(SRC, 0.8, 0.8, AMP)
        assert res.certificate["collapsed_feasible_set"]
        want = entropy_gain(attack_covariance(SRC, AttackParameters(0.8, 0.8, HALF_PI, HALF_PI, 0.0)), AMP)
        assert res.e_star == pytest.approx(want.gain_bits, abs=1e-14)

    @pytest.mark.parametrize("channel", [AMP, LOSS, CONTRA])
    def test_beam_splitter_optimal_below_bound(self, channel):
        for ks in (0.3, 0.8, 1.3):
            if channel.kind == "loss" and ks > 1.0:
                continue
            kf = min(0.9 * stationary_minimum_bound(ks, SRC), 0.95 * kappa_f_range(ks, SRC)[1])
            res = min_entropy_gain(SRC, ks, kf, channel)
            opt = optimal_attack_point(SRC, ks, kf, channel)
            gain_opt = entropy_gain(opt.cov_sw, channel).gain_bits
            assert abs(res.e_star - gain_opt) <= 1e-6
            assert abs(res.argmin.zeta - HALF_PI) <= 1e-3
            assert abs(res.argmin.delta - HALF_PI) <= 1e-3

    def test_upper_bounds_random_draws(self, rng):
        res = min_entropy_gain(SRC, 0.9, 0.6, AMP)
        for _ in range(50):
            params = random_attack_params(rng, SRC, kappa_s=0.9, kappa_f=0.6)
            gain = entropy_gain(attack_covariance(SRC, params), AMP).gain_bits
            assert res.e_star <= gain + 1e-9

    def test_matches_brute_force_grid(self, rng):
        for _ in range(4):
            ch = random_channel(rng)
            ks = float(rng.uniform(0.1, 1.8))
            kf = float(rng.uniform(0.0, kappa_f_range(ks, SRC)[1]))
            res = min_entropy_gain(SRC, ks, kf, ch)
            oracle = min_entropy_gain(SRC, ks, kf, ch, grid_shape=(129, 129, 129), refine=False)
            assert abs(res.e_star - oracle.e_star) <= 1e-6

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            min_entropy_gain(SRC, 0.5, 0.51, AMP)

    def test_thermal_channel_rejected(self):
        with pytest.raises(ValueError):
            min_entropy_gain(SRC, 0.5, 0.4, ChannelModel.amplifier(1.5, env_photons=0.1))

    def test_certificate_fields(self):
        res = min_entropy_gain(SRC, 0.9, 0.6, AMP)
        cert = res.certificate
        assert cert["grid_shape"] == (33, 33, 33)
        assert cert["grid_min"] >= res.e_star - 1e-12
        assert cert["gradient_norm"] <= 1e-4


class TestChiE:
    def test_identity_closed_form(self):
        enc = EncodingSpec(2.0)
        val = chi_E(SRC, enc, 1.0, 1.0, ChannelModel.amplifier(1.0))
        assert val == pytest.approx(g_entropy(0.1 + 2.0) - g_entropy(0.1), abs=1e-12)

    def test_identity_no_encoding_vanishes(self):
        assert chi_E(SRC, ENC0, 1.0, 1.0, ChannelModel.amplifier(1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_non_increasing_in_kappa_f(self):
        for ch in (AMP, LOSS):
            vals = [chi_E(SRC, ENC0, 0.7, kf, ch) for kf in np.linspace(0.0, 0.7, 8)]
            assert np.all(np.diff(vals) <= 1e-8)

    def test_non_negative_with_encoding(self):
        enc = EncodingSpec(1.0)
        for kf in (0.0, 0.3, 0.6):
            assert chi_E(SRC, enc, 0.6, kf, AMP) >= -1e-10


class TestChiEPrime:
    def test_zero_budget_matches_pairwise(self):
        r2 = chi_E_prime(SRC, ENC0, 0.6, 0.0, AMP, grid_shape=(9, 5, 5, 8))
        assert r2.value == pytest.approx(chi_E(SRC, ENC0, 0.6, 0.0, AMP), abs=1e-7)

    @pytest.mark.slow
    def test_equivalence_sample(self):
        for ch, ks, kf in ((AMP, 0.7, 0.5), (LOSS, 0.5, 0.35)):
            r2 = chi_E_prime(SRC, ENC0, ks, kf, ch)
            assert abs(r2.value - chi_E(SRC, ENC0, ks, kf, ch)) <= 1e-5
            assert r2.b1_squared <= 1e-4 * kf * SRC.c_s**2

    def test_parameter_surface(self):
        p = Theorem2Parameters(0.3, 0.7, 1.1, 2.0)
        c1, a1, b1, a2 = p.coefficients(SRC, 0.8, 0.5)
        assert a1**2 + b1**2 + a2**2 == pytest.approx(0.5 * SRC.c_s**2, abs=1e-12)
        assert c1 <= 0.8 * SRC.n_s + 1e-12

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            chi_E_prime(SRC, ENC0, -0.1, 0.2, AMP)
        with pytest.raises(ValueError):
            chi_E_prime(SRC, ENC0, 0.5, -0.2, AMP)


class TestConvexityScan:
    def test_small_grid_no_violations(self):
        report = convexity_scan(SRC, AMP, np.linspace(0.1, 1.5, 6), np.linspace(0.0, 1.0, 6))
        assert report.violations == []
        assert report.n_triples > 0

    def test_single_point_grid_empty_report(self):
        report = convexity_scan(SRC, AMP, [0.5], [0.3])
        assert report.violations == []
        assert report.n_triples == 0
        assert report.n_points == 1

    def test_invalid_points_masked(self):
        report = convexity_scan(SRC, LOSS, [0.2], [0.1, 0.5])
        assert np.isfinite(report.e_star[0, 0])
        assert np.isnan(report.e_star[0, 1])

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            convexity_scan(SRC, AMP, [], [0.1])


class TestFirstOrder:
    @pytest.mark.parametrize("channel", [AMP, LOSS, CONTRA])
    def test_argmin_at_stationary_point(self, channel):
        report = first_order_check(SRC, 0.7, channel)
        assert abs(report.argmin_zeta - HALF_PI) <= 1e-4
        assert abs(report.argmin_delta - HALF_PI) <= 1e-4
        assert report.zeroth_order_spread <= 1e-8
        assert abs(report.reduced_argmin_zeta - HALF_PI) <= 1e-12
        assert abs(report.reduced_argmin_delta - HALF_PI) <= 1e-12

    def test_step_underflow(self):
        with pytest.raises(NumericalError):
            first_order_check(SRC, 0.5, AMP, step=0.0)

    def test_probe_validity_limit(self):
        with pytest.raises(ValueError):
            first_order_check(SRC, 1.2, AMP)
