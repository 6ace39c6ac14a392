import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twqkd.gaussian import (
    CovarianceMatrix,
    SourceSpec,
    covariance_from_moments,
    is_physical,
)
from twqkd.reduction import (
    BeamSplitterOp,
    CorrelationProfile,
    PhaseOp,
    profile_from_covariance,
    reduce_correlations,
    replay_log,
)


def apply_op_to_profile(pi, ps, op):
    # reference replay of one logged step at the moment level
    if isinstance(op, PhaseOp):
        rot = np.exp(1j * op.angle)
        pi[op.mode] *= rot
        ps[op.mode] *= rot
    else:
        t = np.sqrt(op.transmissivity)
        r = np.sqrt(1.0 - op.transmissivity)
        for fam in (pi, ps):
            fa, fb = fam[op.mode_a], fam[op.mode_b]
            fam[op.mode_a] = r * fa + t * fb
            fam[op.mode_b] = t * fa - r * fb
    return pi, ps


def assert_sparsity(profile, scale):
    # single-mode profiles pass through untouched
    if profile.n_modes == 1:
        return
    tol = 1e-12 * max(1.0, scale)
    assert np.all(np.abs(profile.phase_insensitive[1:]) <= tol)
    assert np.all(np.abs(profile.phase_sensitive[2:]) <= tol)
    assert profile.phase_insensitive[0].imag == pytest.approx(0.0, abs=tol)
    assert profile.phase_insensitive[0].real >= -tol
    assert profile.phase_sensitive[1].imag == pytest.approx(0.0, abs=tol)
    assert profile.phase_sensitive[1].real >= -tol


complex_entries = st.lists(
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)).map(lambda t: complex(*t)),
    min_size=1,
    max_size=32,
)


class TestReduceCorrelations:
    def test_two_equal_entries(self):
        prof = CorrelationProfile([0.3, 0.3], [0.0, 0.0])
        red, log = reduce_correlations(prof)
        assert red.phase_insensitive[0] == pytest.approx(np.sqrt(2) * 0.3, abs=1e-14)
        assert red.phase_insensitive[1] == 0.0
        bs = [op for op in log if isinstance(op, BeamSplitterOp)]
        assert len(bs) == 1 and bs[0].transmissivity == pytest.approx(0.5, abs=1e-12)

    def test_all_zero_passthrough(self):
        prof = CorrelationProfile([0.0] * 5, [0.0] * 5)
        red, log = reduce_correlations(prof)
        assert len(log) == 0
        assert np.array_equal(red.phase_insensitive, prof.phase_insensitive)

    def test_single_mode_unchanged(self):
        prof = CorrelationProfile([0.2 + 0.1j], [0.3])
        red, log = reduce_correlations(prof)
        assert len(log) == 0
        assert red.phase_insensitive[0] == 0.2 + 0.1j

    def test_pivot_degeneracy_swap(self):
        prof = CorrelationProfile([0.0, 0.5, 0.2], [0.0, 0.0, 0.0])
        red, log = reduce_correlations(prof)
        assert red.phase_insensitive[0] == pytest.approx(np.hypot(0.5, 0.2), abs=1e-14)
        first = next(op for op in log if isinstance(op, BeamSplitterOp))
        assert first.transmissivity == pytest.approx(1.0)

    @given(complex_entries, complex_entries)
    @settings(max_examples=80, deadline=None)
    def test_random_profiles(self, pi, ps):
        m = min(len(pi), len(ps))
        prof = CorrelationProfile(pi[:m], ps[:m])
        n0, n1 = prof.family_norms()
        red, log = reduce_correlations(prof)
        r0, r1 = red.family_norms()
        scale = np.sqrt(max(n0, n1, 1.0))
        assert r0 == pytest.approx(n0, abs=1e-12 * max(1.0, n0))
        assert r1 == pytest.approx(n1, abs=1e-12 * max(1.0, n1))
        assert_sparsity(red, scale)

    def test_stepwise_conservation(self, rng):
        m = 16
        pi0 = rng.normal(size=m) + 1j * rng.normal(size=m)
        ps0 = rng.normal(size=m) + 1j * rng.normal(size=m)
        _, log = reduce_correlations(CorrelationProfile(pi0, ps0))
        pi, ps = pi0.copy(), ps0.copy()
        for op in log:
            n_pi, n_ps = np.sum(np.abs(pi) ** 2), np.sum(np.abs(ps) ** 2)
            pi, ps = apply_op_to_profile(pi, ps, op)
            assert np.sum(np.abs(pi) ** 2) == pytest.approx(n_pi, abs=1e-12 * max(1, n_pi))
            assert np.sum(np.abs(ps) ** 2) == pytest.approx(n_ps, abs=1e-12 * max(1, n_ps))

    def test_idempotent(self, rng):
        m = 12
        prof = CorrelationProfile(
            rng.normal(size=m) + 1j * rng.normal(size=m),
            rng.normal(size=m) + 1j * rng.normal(size=m),
        )
        red, _ = reduce_correlations(prof)
        red2, log2 = reduce_correlations(red)
        assert len(log2) == 0
        assert np.array_equal(red2.phase_insensitive, red.phase_insensitive)
        assert np.array_equal(red2.phase_sensitive, red.phase_sensitive)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            CorrelationProfile([np.inf], [0.0])


def random_probe_reference_state(rng, n_refs, src):
    # weakly correlated probe against i.i.d. thermal references (physical)
    n = n_refs + 1
    number = np.diag([0.6] + [src.n_s] * n_refs).astype(complex)
    pair = np.zeros((n, n), dtype=complex)
    for k in range(1, n):
        number[0, k] = 0.05 * (rng.normal() + 1j * rng.normal())
        number[k, 0] = np.conj(number[0, k])
        pair[0, k] = pair[k, 0] = 0.05 * (rng.normal() + 1j * rng.normal())
    cov = covariance_from_moments(number, pair)
    assert is_physical(cov)[0]
    return cov


class TestReplayLog:
    def test_empty_log_identity(self):
        cov = covariance_from_moments(np.diag([0.5, 0.2]).astype(complex), np.zeros((2, 2), complex))
        out = replay_log(cov, reduce_correlations(CorrelationProfile([0.0], [0.0]))[1])
        assert np.array_equal(out.mat, cov.mat)

    def test_round_trip(self, rng):
        src = SourceSpec(0.2)
        for n_refs in (2, 4, 7):
            cov = random_probe_reference_state(rng, n_refs, src)
            prof = profile_from_covariance(cov)
            red, log = reduce_correlations(prof)
            replayed = profile_from_covariance(replay_log(cov, log))
            assert np.max(np.abs(replayed.phase_insensitive - red.phase_insensitive)) <= 1e-10
            assert np.max(np.abs(replayed.phase_sensitive - red.phase_sensitive)) <= 1e-10

    def test_reference_block_spectrum_invariant(self, rng):
        src = SourceSpec(0.2)
        cov = random_probe_reference_state(rng, 3, src)
        _, log = reduce_correlations(profile_from_covariance(cov))
        out = replay_log(cov, log)
        refs = list(range(1, 4))
        before = np.sort(np.linalg.eigvalsh(cov.select_modes(refs).mat))
        after = np.sort(np.linalg.eigvalsh(out.select_modes(refs).mat))
        assert np.max(np.abs(before - after)) <= 1e-12

    def test_thermal_references_stay_thermal(self, rng):
        # i.i.d. thermal references keep a product-thermal reference block
        src = SourceSpec(0.2)
        cov = random_probe_reference_state(rng, 4, src)
        _, log = reduce_correlations(profile_from_covariance(cov))
        out = replay_log(cov, log)
        want = (2.0 * src.n_s + 1.0) * np.eye(8)
        assert np.max(np.abs(out.select_modes(range(1, 5)).mat - want)) <= 1e-12

    def test_index_out_of_range(self):
        cov = covariance_from_moments(np.diag([0.5, 0.2]).astype(complex), np.zeros((2, 2), complex))
        _, log = reduce_correlations(CorrelationProfile([0.1, 0.2], [0.0, 0.0]))
        with pytest.raises(ValueError):
            replay_log(cov, log)  # two reference modes will not fit
