"""Constrained Gaussian attack parameterization on the probe mode.

The eavesdropper replaces the probe with a mode built from a general
Bogoliubov combination of the probe and ancilla vacuum modes.  After fixing
the two intrusion parameters (received-photon ratio kappa_s and
cross-correlation ratio kappa_f), the entropy quantities depend on three
leftover angles (zeta, delta, xi).  This module produces the joint
signal/reference covariance for any admissible angle triple, the admissible
kappa_f interval, and the closed-form covariances of the beam-splitter
injection attack that is optimal in the low-intrusion region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channels
from .gaussian import (
    CovarianceMatrix,
    SourceSpec,
    covariance_from_moments,
    symplectic_eigenvalues,
)

_RANGE_TOL = 1e-12


@dataclass(frozen=True)
class AttackParameters:
    """Intrusion parameters plus the three free Bogoliubov angles."""

    kappa_s: float
    kappa_f: float
    zeta: float
    delta: float
    xi: float

    def __post_init__(self):
        if self.kappa_s < 0:
            raise ValueError(f"kappa_s must be >= 0, got {self.kappa_s}")
        if self.kappa_f < 0:
            raise ValueError(f"kappa_f must be >= 0, got {self.kappa_f}")
        if not 0.0 <= self.zeta <= np.pi / 2 + 1e-12:
            raise ValueError(f"zeta must be in [0, pi/2], got {self.zeta}")
        if not 0.0 <= self.delta <= np.pi / 2 + 1e-12:
            raise ValueError(f"delta must be in [0, pi/2], got {self.delta}")
        if not -np.pi - 1e-12 <= self.xi <= np.pi + 1e-12:
            raise ValueError(f"xi must be in [-pi, pi], got {self.xi}")


def kappa_f_range(kappa_s: float, src: SourceSpec):
    """Admissible closed interval for kappa_f at the given kappa_s."""
    if kappa_s < 0:
        raise ValueError(f"kappa_s must be >= 0, got {kappa_s}")
    hi = min(kappa_s, (1.0 + 2.0 * kappa_s * src.n_s) / (1.0 + 2.0 * src.n_s))
    return 0.0, hi


def stationary_minimum_bound(kappa_s: float, src: SourceSpec) -> float:
    """kappa_f value below which the stationary point zeta = delta = pi/2 is
    also the global entropy-gain minimum (numerically established; for the
    pure-loss channel this additionally requires kappa_s <= 1)."""
    return (1.0 + kappa_s * src.n_s) / (1.0 + src.n_s)


def zeta_window(src: SourceSpec, kappa_s: float, kappa_f: float):
    """Feasible zeta interval implied by the positivity constraints.

    Below the stationary-optimality bound the window ends at pi/2; above it
    the upper edge moves inward because the ancilla norm would turn negative.
    """
    deficit = (kappa_s - kappa_f) * src.n_s
    if kappa_f <= 0.0 or deficit <= 0.0:
        return 0.0, np.pi / 2
    r = kappa_f / deficit
    cz_hi = min(1.0, r)
    lo_gamma = 1.0 - (1.0 + deficit) / kappa_f
    cz_lo = min(max(0.0, lo_gamma) * r, cz_hi)
    lo = float(np.arccos(np.sqrt(np.clip(cz_hi, 0.0, 1.0))))
    hi = float(np.arccos(np.sqrt(np.clip(cz_lo, 0.0, 1.0))))
    return lo, hi


@dataclass(frozen=True)
class BogoliubovCoefficients:
    """Derived attack coefficients: probe amplitudes and ancilla norms."""

    u0: float
    v0: float
    uu: float
    vv: float
    vu: complex

    @property
    def pair_moment(self) -> complex:
        """<a_S^2> of the attacked probe (enters the squeezing of its block)."""
        return self.vu


def _check_range(src: SourceSpec, kappa_s: float, kappa_f: float):
    lo, hi = kappa_f_range(kappa_s, src)
    if kappa_f < lo - _RANGE_TOL or kappa_f > hi + _RANGE_TOL:
        raise ValueError(
            f"kappa_f = {kappa_f:.12g} outside admissible [{lo:.12g}, {hi:.12g}] "
            f"for kappa_s = {kappa_s:.12g}"
        )


def derived_coefficients(src: SourceSpec, params: AttackParameters) -> BogoliubovCoefficients:
    """Resolve the angle parameterization into Bogoliubov coefficients.

    Raises if the commutator/positivity constraints exclude the requested
    angles (this happens for small zeta when the correlation deficit exceeds
    kappa_f, and for large zeta above the stationary-optimality bound).
    """
    _check_range(src, params.kappa_s, params.kappa_f)
    ns = src.n_s
    kf = params.kappa_f
    deficit = (params.kappa_s - kf) * ns
    if kf <= 0.0:
        u0 = v0 = 0.0
        cos2_gamma = 0.0
        uu = deficit + 1.0
        vv = deficit
    else:
        cos2_gamma = (deficit / kf) * np.cos(params.zeta) ** 2
        if cos2_gamma > 1.0 + 1e-12:
            raise ValueError(
                f"zeta = {params.zeta:.6g} outside admissible range (cos^2 gamma = {cos2_gamma:.6g})"
            )
        cos2_gamma = min(cos2_gamma, 1.0)
        u0 = np.sqrt(kf) * np.sqrt(1.0 - cos2_gamma)
        v0 = np.sqrt(kf) * np.sqrt(cos2_gamma)
        uu = deficit + 1.0 - kf + kf * cos2_gamma
        vv = max(deficit - kf * cos2_gamma, 0.0)
        if uu < -1e-12:
            raise ValueError(
                f"parameters violate positivity: |u|^2 = {uu:.6g} < 0 "
                f"(kappa_f above the stationary-optimality bound requires smaller zeta)"
            )
        uu = max(uu, 0.0)
    vu = np.sqrt(vv * uu) * np.cos(params.delta) * np.exp(1j * params.xi)
    return BogoliubovCoefficients(u0=float(u0), v0=float(v0), uu=float(uu), vv=float(vv), vu=complex(vu))


def attack_covariance(src: SourceSpec, params: AttackParameters) -> CovarianceMatrix:
    """Joint covariance of the attacked probe and the retained reference."""
    coeff = derived_coefficients(src, params)
    w = coeff.vu + (2.0 * src.n_s + 1.0) * coeff.v0 * coeff.u0
    number = np.array(
        [
            [params.kappa_s * src.n_s, coeff.v0 * src.c_s],
            [coeff.v0 * src.c_s, src.n_s],
        ],
        dtype=complex,
    )
    pair = np.array(
        [
            [w, coeff.u0 * src.c_s],
            [coeff.u0 * src.c_s, 0.0],
        ],
        dtype=complex,
    )
    return covariance_from_moments(number, pair)


@dataclass(frozen=True)
class OptimalAttackPoint:
    """Beam-splitter injection attack: closed-form input covariance and its
    complementary-channel output, with both symplectic spectra."""

    cov_sw: CovarianceMatrix
    cov_nprime_w: CovarianceMatrix
    mu: np.ndarray
    nu: np.ndarray


def beam_splitter_attack_covariance(src: SourceSpec, kappa_s: float, kappa_f: float) -> CovarianceMatrix:
    """Input covariance of the beam-splitter injection attack: the reference
    cross block of the unattacked source scaled by sqrt(kappa_f).

    Defined only up to the stationary-optimality bound; beyond it the
    ancilla norm of the underlying transformation would be negative and the
    written matrix is unphysical.
    """
    _check_range(src, kappa_s, kappa_f)
    bound = stationary_minimum_bound(kappa_s, src)
    if kappa_f > bound + _RANGE_TOL:
        raise ValueError(
            f"beam-splitter attack undefined: kappa_f = {kappa_f:.12g} exceeds "
            f"the stationary-optimality bound {bound:.12g}"
        )
    a = 1.0 + 2.0 * kappa_s * src.n_s
    b = 1.0 + 2.0 * src.n_s
    c = 2.0 * np.sqrt(kappa_f) * src.c_s
    z = np.diag([1.0, -1.0])
    m = np.zeros((4, 4))
    m[:2, :2] = a * np.eye(2)
    m[2:, 2:] = b * np.eye(2)
    m[:2, 2:] = c * z
    m[2:, :2] = c * z
    return CovarianceMatrix(m)


def optimal_attack_point(
    src: SourceSpec, kappa_s: float, kappa_f: float, channel: channels.ChannelModel
) -> OptimalAttackPoint:
    cov_sw = beam_splitter_attack_covariance(src, kappa_s, kappa_f)
    cov_nw = channels.complementary_output_cov(cov_sw, channel)
    return OptimalAttackPoint(
        cov_sw=cov_sw,
        cov_nprime_w=cov_nw,
        mu=symplectic_eigenvalues(cov_sw),
        nu=symplectic_eigenvalues(cov_nw),
    )
