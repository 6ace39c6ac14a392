import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twqkd.gaussian import (
    CovarianceMatrix,
    SourceSpec,
    apply_symplectic,
    beam_splitter,
    covariance_from_moments,
    direct_sum,
    g_entropy,
    is_physical,
    moments_from_covariance,
    phase_shift,
    state_entropy,
    symplectic_eigenvalues,
    thermal_covariance,
    tmsv_covariance,
    vacuum_covariance,
)

from conftest import random_symplectic


def truncated_thermal_entropy(n_mean, cutoff=60):
    # independent oracle: -sum p log2 p over the photon-number distribution
    k = np.arange(cutoff + 1)
    p = n_mean**k / (n_mean + 1.0) ** (k + 1)
    return float(-np.sum(p * np.log2(p)))


class TestGEntropy:
    def test_vacuum(self):
        assert g_entropy(0.0) == 0.0

    def test_one_photon_exact(self):
        assert g_entropy(1.0) == pytest.approx(2.0, abs=1e-14)

    def test_against_truncated_sum(self):
        assert g_entropy(0.5) == pytest.approx(truncated_thermal_entropy(0.5), abs=1e-10)

    def test_negative_raises(self):
        with pytest.raises(ValueError):
            g_entropy(-0.1)

    def test_array_input(self):
        out = g_entropy(np.array([0.0, 1.0]))
        assert np.allclose(out, [0.0, 2.0])

    @given(st.floats(0.0, 100.0), st.floats(0.0, 100.0))
    @settings(max_examples=200, deadline=None)
    def test_concave_and_increasing(self, a, b):
        mid = g_entropy((a + b) / 2.0)
        assert mid >= (g_entropy(a) + g_entropy(b)) / 2.0 - 1e-12
        if a < b:
            assert g_entropy(a) <= g_entropy(b) + 1e-12


class TestTmsv:
    def test_vacuum_source(self):
        assert np.array_equal(tmsv_covariance(SourceSpec(0.0)).mat, np.eye(4))

    @pytest.mark.parametrize("n_s", [0.01, 0.5, 1.0, 10.0])
    def test_pure(self, n_s):
        nu = symplectic_eigenvalues(tmsv_covariance(SourceSpec(n_s)))
        assert np.allclose(nu, 1.0, atol=1e-10)

    def test_determinant_unity(self):
        assert np.linalg.det(tmsv_covariance(SourceSpec(0.1)).mat) == pytest.approx(1.0, abs=1e-10)

    def test_source_spec_identity(self):
        s = SourceSpec(0.37)
        assert s.c_s**2 == pytest.approx(0.37 * 1.37, abs=1e-15)

    def test_source_spec_rejects_negative(self):
        with pytest.raises(ValueError):
            SourceSpec(-1e-6)


class TestSymplecticEigenvalues:
    def test_vacuum(self):
        assert np.allclose(symplectic_eigenvalues(vacuum_covariance(2)), [1.0, 1.0])

    def test_thermal_direct_sum(self):
        cov = direct_sum(thermal_covariance(0.3), thermal_covariance(1.2))
        assert np.allclose(sorted(symplectic_eigenvalues(cov)), [1.6, 3.4])

    def test_descending_order(self):
        cov = direct_sum(thermal_covariance(0.1), thermal_covariance(2.0))
        nu = symplectic_eigenvalues(cov)
        assert nu[0] >= nu[1]

    def test_invariant_under_symplectic(self, rng):
        cov = direct_sum(thermal_covariance(0.4), thermal_covariance(1.1), thermal_covariance(0.0))
        for _ in range(20):
            s = random_symplectic(rng, 3, n_factors=10)
            before = symplectic_eigenvalues(cov)
            after = symplectic_eigenvalues(apply_symplectic(cov, s))
            assert np.max(np.abs(before - after)) <= 1e-8


class TestStateEntropy:
    def test_vacuum(self):
        assert state_entropy(vacuum_covariance(3)) == 0.0

    @pytest.mark.parametrize("n", [0.2, 1.0, 5.0])
    def test_thermal(self, n):
        assert state_entropy(thermal_covariance(n)) == pytest.approx(g_entropy(n), abs=1e-12)

    def test_additive_over_direct_sum(self):
        a = thermal_covariance(0.7)
        b = tmsv_covariance(SourceSpec(0.3))
        total = state_entropy(direct_sum(a, b))
        assert total == pytest.approx(state_entropy(a) + state_entropy(b), abs=1e-10)

    def test_unphysical_rejected(self):
        with pytest.raises(ValueError):
            state_entropy(CovarianceMatrix(0.5 * np.eye(2)))


class TestApplySymplectic:
    def test_full_transmission_beam_splitter_is_identity(self):
        cov = tmsv_covariance(SourceSpec(0.8))
        out = apply_symplectic(cov, beam_splitter(1.0), [0, 1])
        assert np.allclose(out.mat, cov.mat, atol=1e-14)

    def test_phase_on_vacuum(self):
        out = apply_symplectic(vacuum_covariance(1), phase_shift(0.77))
        assert np.allclose(out.mat, np.eye(2), atol=1e-15)

    def test_balanced_beam_splitter_splits_thermal(self):
        cov = direct_sum(thermal_covariance(0.6), vacuum_covariance(1))
        out = apply_symplectic(cov, beam_splitter(0.5), [0, 1])
        for mode in (0, 1):
            blk = out.block(mode, mode)
            assert np.allclose(np.diag(blk), 2.0 * 0.3 + 1.0, atol=1e-12)

    def test_out_of_range_mode(self):
        with pytest.raises(ValueError):
            apply_symplectic(vacuum_covariance(2), phase_shift(0.1), [5])


class TestIsPhysical:
    def test_vacuum(self):
        ok, nu = is_physical(vacuum_covariance(1))
        assert ok and nu == pytest.approx(1.0)

    def test_below_vacuum(self):
        ok, nu = is_physical(CovarianceMatrix(0.5 * np.eye(2)))
        assert not ok and nu == pytest.approx(0.5)

    def test_scaled_correlations_break_purity(self):
        m = np.array(tmsv_covariance(SourceSpec(1.0)).mat)
        m[:2, 2:] *= 1.01
        m[2:, :2] *= 1.01
        ok, nu = is_physical(CovarianceMatrix(m))
        assert not ok and nu < 1.0 - 1e-9


class TestConstruction:
    def test_symmetrized(self, rng):
        m = rng.normal(size=(4, 4)) * 1e-13 + np.eye(4)
        cov = CovarianceMatrix(m)
        assert np.array_equal(cov.mat, cov.mat.T)

    def test_asymmetric_rejected(self):
        m = np.eye(2)
        m[0, 1] = 1e-6
        with pytest.raises(ValueError):
            CovarianceMatrix(m)

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            CovarianceMatrix(np.eye(3))

    def test_immutable(self):
        cov = vacuum_covariance(1)
        with pytest.raises(ValueError):
            cov.mat[0, 0] = 2.0


class TestMoments:
    def test_round_trip(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 4))
            herm = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            number = 0.1 * (herm + herm.conj().T) + 2.0 * np.eye(n)
            sym = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            pair = 0.1 * (sym + sym.T)
            cov = covariance_from_moments(number, pair)
            n2, p2 = moments_from_covariance(cov)
            assert np.allclose(n2, number, atol=1e-12)
            assert np.allclose(p2, pair, atol=1e-12)

    def test_tmsv_moments(self):
        src = SourceSpec(0.25)
        number, pair = moments_from_covariance(tmsv_covariance(src))
        assert number[0, 0] == pytest.approx(0.25, abs=1e-14)
        assert pair[0, 1] == pytest.approx(src.c_s, abs=1e-14)
        assert number[0, 1] == pytest.approx(0.0, abs=1e-14)

    def test_photon_number(self):
        cov = thermal_covariance(1.7)
        assert cov.photon_number(0) == pytest.approx(1.7, abs=1e-14)
