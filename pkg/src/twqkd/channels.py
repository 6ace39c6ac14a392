"""Receiver-side internal channel models and their symplectic dilations.

Three single-mode phase-covariant/contravariant Gaussian channels are
supported: a quantum-limited amplifier with gain G >= 1, a pure-loss channel
with transmissivity eta in [0, 1], and the contravariant amplifier (the
amplifier dilation with its two outputs exchanged).  Each is realized as an
explicit two-mode dilation acting on (input, vacuum environment); the direct
output lives in the first output slot, the complementary output in the
second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import (
    CovarianceMatrix,
    SymplecticTransform,
    direct_sum,
    is_physical,
    vacuum_covariance,
)

AMPLIFIER = "amplifier"
LOSS = "loss"
CONTRA_AMPLIFIER = "contra_amplifier"
_KINDS = (AMPLIFIER, LOSS, CONTRA_AMPLIFIER)


@dataclass(frozen=True)
class ChannelModel:
    """One of the three supported channels plus its environment brightness.

    Bound computations require a quantum-limited channel (env_photons == 0);
    the thermal variants exist only for the decomposition diagnostic.
    """

    kind: str
    gain: float = 1.0
    transmissivity: float = 1.0
    env_photons: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind in (AMPLIFIER, CONTRA_AMPLIFIER) and self.gain < 1.0:
            raise ValueError(f"amplifier gain must be >= 1, got {self.gain}")
        if self.kind == LOSS and not 0.0 <= self.transmissivity <= 1.0:
            raise ValueError(f"transmissivity must be in [0, 1], got {self.transmissivity}")
        if self.env_photons < 0:
            raise ValueError(f"environment photon number must be >= 0, got {self.env_photons}")

    @classmethod
    def amplifier(cls, gain: float, env_photons: float = 0.0) -> "ChannelModel":
        return cls(AMPLIFIER, gain=gain, env_photons=env_photons)

    @classmethod
    def loss(cls, transmissivity: float, env_photons: float = 0.0) -> "ChannelModel":
        return cls(LOSS, transmissivity=transmissivity, env_photons=env_photons)

    @classmethod
    def contra_amplifier(cls, gain: float, env_photons: float = 0.0) -> "ChannelModel":
        return cls(CONTRA_AMPLIFIER, gain=gain, env_photons=env_photons)

    @classmethod
    def identity(cls) -> "ChannelModel":
        return cls(AMPLIFIER, gain=1.0)

    def require_quantum_limited(self):
        if self.env_photons != 0.0:
            raise ValueError("operation requires a quantum-limited channel (env_photons == 0)")


@dataclass(frozen=True)
class EncodingSpec:
    """Symbol encoding: mean added photon number and modes per symbol."""

    e_x: float
    m_e: int = 1

    def __post_init__(self):
        if not np.isfinite(self.e_x) or self.e_x < 0:
            raise ValueError(f"encoding photon number must be >= 0, got {self.e_x}")
        if int(self.m_e) != self.m_e or self.m_e < 1:
            raise ValueError(f"modes per symbol must be a positive integer, got {self.m_e}")


def dilation_symplectic(channel: ChannelModel) -> SymplecticTransform:
    """Two-mode dilation on (input, env) -> (direct output, complement)."""
    eye = np.eye(2)
    z = np.diag([1.0, -1.0])
    if channel.kind == AMPLIFIER:
        c = np.sqrt(channel.gain)
        s = np.sqrt(channel.gain - 1.0)
        m = np.block([[c * eye, s * z], [s * z, c * eye]])
    elif channel.kind == LOSS:
        t = np.sqrt(channel.transmissivity)
        r = np.sqrt(1.0 - channel.transmissivity)
        m = np.block([[t * eye, r * eye], [r * eye, -t * eye]])
    else:
        c = np.sqrt(channel.gain)
        s = np.sqrt(channel.gain - 1.0)
        amp = np.block([[c * eye, s * z], [s * z, c * eye]])
        swap = np.block([[np.zeros((2, 2)), eye], [eye, np.zeros((2, 2))]])
        m = swap @ amp
    return SymplecticTransform(m)


def output_photon_number(n_in: float, channel: ChannelModel, enc: EncodingSpec) -> float:
    """Mean photon number of the direct output for pre-encoding input n_in."""
    if not np.isfinite(n_in) or n_in < 0:
        raise ValueError(f"input photon number must be >= 0, got {n_in}")
    channel.require_quantum_limited()
    loaded = n_in + enc.e_x
    if channel.kind == AMPLIFIER:
        return channel.gain * loaded + channel.gain - 1.0
    if channel.kind == LOSS:
        return channel.transmissivity * loaded
    return (channel.gain - 1.0) * (loaded + 1.0)


def _dilated(cov_sw: CovarianceMatrix, channel: ChannelModel) -> CovarianceMatrix:
    channel.require_quantum_limited()
    ok, nu_min = is_physical(cov_sw)
    # a unit symplectic eigenvalue of a strongly squeezed state is resolved
    # only to ~eps * norm, so widen the acceptance for large matrices
    tol = max(1e-9, 4e-12 * float(np.max(np.abs(cov_sw.mat))))
    if not ok and nu_min < 1.0 - tol:
        raise ValueError(f"input state unphysical: min symplectic eigenvalue {nu_min:.12g}")
    ext = direct_sum(cov_sw, vacuum_covariance(1))
    n = ext.n_modes
    s = dilation_symplectic(channel).embed(n, [0, n - 1])
    return CovarianceMatrix(s.mat @ ext.mat @ s.mat.T)


def direct_output_cov(cov_sw: CovarianceMatrix, channel: ChannelModel) -> CovarianceMatrix:
    """Joint state of the direct channel output and the retained modes."""
    out = _dilated(cov_sw, channel)
    return out.select_modes(range(cov_sw.n_modes))


def complementary_output_cov(cov_sw: CovarianceMatrix, channel: ChannelModel) -> CovarianceMatrix:
    """Joint state of the channel environment output and the retained modes.

    The environment mode comes first in the result, followed by the retained
    modes in their original order.
    """
    out = _dilated(cov_sw, channel)
    n = out.n_modes
    return out.select_modes([n - 1] + list(range(1, cov_sw.n_modes)))


def covariance_action(channel: ChannelModel):
    """Single-mode covariance map cov -> X cov X^T + Y (thermal env allowed)."""
    eye = np.eye(2)
    n0 = channel.env_photons
    if channel.kind == AMPLIFIER:
        x = np.sqrt(channel.gain) * eye
        y = (channel.gain - 1.0) * (2.0 * n0 + 1.0) * eye
    elif channel.kind == LOSS:
        x = np.sqrt(channel.transmissivity) * eye
        y = (1.0 - channel.transmissivity) * (2.0 * n0 + 1.0) * eye
    else:
        x = np.sqrt(channel.gain - 1.0) * np.diag([1.0, -1.0])
        y = channel.gain * (2.0 * n0 + 1.0) * eye
    return x, y


def _apply_action(mat: np.ndarray, action) -> np.ndarray:
    x, y = action
    return x @ mat @ x.T + y


def thermal_decomposition_residual(channel: ChannelModel, samples, n0_prime: float | None = None) -> float:
    """Max-norm gap between a thermal channel and its quantum-limited chain.

    For the amplifier, the candidate chain is loss(1/G', N0') after two
    quantum-limited amplifiers (G', then the channel gain), with
    G' = sqrt(1+N0') / sqrt(1+N0'-N0(G^2-1)) and the constraint
    N0' > N0 (G^2 - 1).  For the loss channel it is amplifier(1/eta') after
    two pure-loss stages, eta' = 1/sqrt(1+N0(1-eta^2)).  This is a
    diagnostic only: the mean-photon bookkeeping of these chains does not
    close in general for N0 > 0 (e.g. gain 1.5, N0 = 0.2, N0' = 1.0 on
    vacuum gives residual ~5.83e-2), so the residual is reported, never
    asserted.
    """
    if isinstance(samples, CovarianceMatrix):
        samples = [samples]
    samples = list(samples)
    if not samples:
        raise ValueError("at least one sample covariance is required")
    for s in samples:
        if s.n_modes != 1:
            raise ValueError("samples must be single-mode covariances")

    n0 = channel.env_photons
    if channel.kind == AMPLIFIER:
        g = channel.gain
        if n0_prime is None:
            raise ValueError("amplifier decomposition requires n0_prime")
        if n0_prime <= n0 * (g**2 - 1.0):
            raise ValueError(
                f"need n0_prime > N0 (G^2 - 1) = {n0 * (g ** 2 - 1.0):.6g}, got {n0_prime}"
            )
        g_prime = np.sqrt(1.0 + n0_prime) / np.sqrt(1.0 + n0_prime - n0 * (g**2 - 1.0))
        stages = [
            covariance_action(ChannelModel.amplifier(g)),
            covariance_action(ChannelModel.amplifier(g_prime)),
            covariance_action(ChannelModel.loss(1.0 / g_prime, env_photons=n0_prime)),
        ]
    elif channel.kind == LOSS:
        eta = channel.transmissivity
        eta_prime = 1.0 / np.sqrt(1.0 + n0 * (1.0 - eta**2))
        stages = [
            covariance_action(ChannelModel.loss(eta)),
            covariance_action(ChannelModel.loss(eta_prime)),
            covariance_action(ChannelModel.amplifier(1.0 / eta_prime)),
        ]
    else:
        raise ValueError("no decomposition chain is defined for the contravariant amplifier")

    target = covariance_action(channel)
    worst = 0.0
    for sample in samples:
        composed = sample.mat
        for action in stages:
            composed = _apply_action(composed, action)
        direct = _apply_action(sample.mat, target)
        worst = max(worst, float(np.max(np.abs(composed - direct))))
    return worst
