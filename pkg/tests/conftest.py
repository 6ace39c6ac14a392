"""Shared helpers: random transforms, parameter samplers, closed-form oracles."""

import numpy as np
import pytest

from twqkd import channels
from twqkd.attacks import (
    AttackParameters,
    derived_coefficients,
    kappa_f_range,
    zeta_window,
)
from twqkd.channels import ChannelModel
from twqkd.gaussian import CovarianceMatrix, SourceSpec, SymplecticTransform
from twqkd.gaussian import beam_splitter, phase_shift, single_mode_squeezer


def random_symplectic(rng, n_modes: int, n_factors: int = 10) -> SymplecticTransform:
    """Product of random beam-splitter/phase/squeeze factors on n_modes."""
    full = SymplecticTransform(np.eye(2 * n_modes))
    for _ in range(n_factors):
        kind = rng.integers(3)
        if kind == 0 and n_modes >= 2:
            i, j = rng.choice(n_modes, size=2, replace=False)
            factor = beam_splitter(rng.uniform(0.0, 1.0)).embed(n_modes, [int(i), int(j)])
        elif kind == 1:
            m = int(rng.integers(n_modes))
            factor = phase_shift(rng.uniform(-np.pi, np.pi)).embed(n_modes, [m])
        else:
            m = int(rng.integers(n_modes))
            factor = single_mode_squeezer(rng.uniform(-0.8, 0.8)).embed(n_modes, [m])
        full = factor @ full
    return full


def random_channel(rng) -> ChannelModel:
    kind = rng.integers(3)
    if kind == 0:
        return ChannelModel.amplifier(float(rng.uniform(1.0, 3.0)))
    if kind == 1:
        return ChannelModel.loss(float(rng.uniform(0.05, 1.0)))
    return ChannelModel.contra_amplifier(float(rng.uniform(1.0, 3.0)))


def random_attack_params(rng, src: SourceSpec, kappa_s=None, kappa_f=None) -> AttackParameters:
    """Uniform draw over the feasible attack box at (possibly random) intrusion."""
    if kappa_s is None:
        kappa_s = float(rng.uniform(0.02, 2.0))
    if kappa_f is None:
        _, hi = kappa_f_range(kappa_s, src)
        kappa_f = float(rng.uniform(0.0, hi))
    z_lo, z_hi = zeta_window(src, kappa_s, kappa_f)
    return AttackParameters(
        kappa_s,
        kappa_f,
        float(rng.uniform(z_lo, z_hi)),
        float(rng.uniform(0.0, np.pi / 2)),
        float(rng.uniform(-np.pi, np.pi)),
    )


def closed_form_complement(src: SourceSpec, params: AttackParameters, channel: ChannelModel) -> np.ndarray:
    """Block-formula oracle for the complement output of an attacked pair.

    Independent transcription of the per-channel closed forms, written in
    terms of the resolved Bogoliubov coefficients; the probe-block scalar
    for the pure-loss case uses the attenuated probe photon number (the
    complement's photon number is (1-eta) <a_S^dag a_S> there).
    """
    coeff = derived_coefficients(src, params)
    ns_probe = params.kappa_s * src.n_s
    w = coeff.vu + (2.0 * src.n_s + 1.0) * coeff.v0 * coeff.u0
    u0, v0 = coeff.u0, coeff.v0
    cs = src.c_s

    if channel.kind == channels.AMPLIFIER:
        g = channel.gain
        a_scalar = 0.5 + (g - 1.0) * (ns_probe + 1.0)
        x = (g - 1.0) * w
        a_blk = 2.0 * np.array(
            [[a_scalar + x.real, -x.imag], [-x.imag, a_scalar - x.real]]
        )
        c_blk = 2.0 * np.sqrt(g - 1.0) * cs * np.array(
            [[u0 + v0, 0.0], [0.0, u0 - v0]]
        )
    elif channel.kind == channels.LOSS:
        eta = channel.transmissivity
        a_scalar = 0.5 + (1.0 - eta) * ns_probe
        x = (1.0 - eta) * w
        a_blk = 2.0 * np.array(
            [[a_scalar + x.real, x.imag], [x.imag, a_scalar - x.real]]
        )
        c_blk = np.sqrt(1.0 - eta) * 2.0 * cs * np.array(
            [[u0 + v0, 0.0], [0.0, v0 - u0]]
        )
    else:
        g = channel.gain
        a_scalar = 0.5 + g * ns_probe + (g - 1.0)
        x = g * w
        a_blk = 2.0 * np.array(
            [[a_scalar + x.real, x.imag], [x.imag, a_scalar - x.real]]
        )
        c_blk = np.sqrt(g) * 2.0 * cs * np.array([[u0 + v0, 0.0], [0.0, v0 - u0]])

    out = np.zeros((4, 4))
    out[:2, :2] = a_blk
    out[:2, 2:] = c_blk
    out[2:, :2] = c_blk.T
    out[2:, 2:] = (2.0 * src.n_s + 1.0) * np.eye(2)
    return out


def moment_complement_oracle(cov_sw: CovarianceMatrix, channel: ChannelModel) -> CovarianceMatrix:
    """Moment-level oracle: complement moments written directly from the
    channel input-output relations, for arbitrary (probe, references) input."""
    from twqkd.gaussian import covariance_from_moments, moments_from_covariance

    number, pair = moments_from_covariance(cov_sw)
    n = number.shape[0]
    n_out = np.array(number, dtype=complex)
    p_out = np.array(pair, dtype=complex)
    if channel.kind == channels.AMPLIFIER:
        g = channel.gain
        n_out[0, 0] = (g - 1.0) * (number[0, 0].real + 1.0)
        p_out[0, 0] = (g - 1.0) * np.conj(pair[0, 0])
        for k in range(1, n):
            p_out[0, k] = p_out[k, 0] = np.sqrt(g - 1.0) * number[0, k]
            n_out[0, k] = np.sqrt(g - 1.0) * pair[0, k]
            n_out[k, 0] = np.conj(n_out[0, k])
    elif channel.kind == channels.LOSS:
        eta = channel.transmissivity
        n_out[0, 0] = (1.0 - eta) * number[0, 0].real
        p_out[0, 0] = (1.0 - eta) * pair[0, 0]
        for k in range(1, n):
            p_out[0, k] = p_out[k, 0] = np.sqrt(1.0 - eta) * pair[0, k]
            n_out[0, k] = np.sqrt(1.0 - eta) * number[0, k]
            n_out[k, 0] = np.conj(n_out[0, k])
    else:
        g = channel.gain
        n_out[0, 0] = g * number[0, 0].real + (g - 1.0)
        p_out[0, 0] = g * pair[0, 0]
        for k in range(1, n):
            p_out[0, k] = p_out[k, 0] = np.sqrt(g) * pair[0, k]
            n_out[0, k] = np.sqrt(g) * number[0, k]
            n_out[k, 0] = np.conj(n_out[0, k])
    return covariance_from_moments(n_out, p_out)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
