"""Beam-splitter compression of multi-mode cross-correlations.

A probe mode correlated with M reference modes carries two complex
correlation vectors: the phase-insensitive entries <a_S^dag a_Wn> and the
phase-sensitive entries <a_S a_Wn>.  Passive unitaries on the reference
modes alone can concentrate the first family entirely into mode 0 and the
second into modes 0 and 1, preserving each family's total squared
magnitude.  The applied operations are recorded so the same compression can
be replayed on a full covariance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import CovarianceMatrix, SymplecticTransform, apply_symplectic, phase_shift

_ZERO = 1e-300


@dataclass(frozen=True)
class CorrelationProfile:
    """Cross-correlation vectors of one probe mode against M reference modes."""

    phase_insensitive: np.ndarray
    phase_sensitive: np.ndarray

    def __post_init__(self):
        pi = np.atleast_1d(np.asarray(self.phase_insensitive, dtype=complex))
        ps = np.atleast_1d(np.asarray(self.phase_sensitive, dtype=complex))
        if pi.ndim != 1 or ps.shape != pi.shape or pi.size < 1:
            raise ValueError("correlation families must be 1-D and of equal length >= 1")
        if not (np.all(np.isfinite(pi.view(float))) and np.all(np.isfinite(ps.view(float)))):
            raise ValueError("correlation entries must be finite")
        pi.setflags(write=False)
        ps.setflags(write=False)
        object.__setattr__(self, "phase_insensitive", pi)
        object.__setattr__(self, "phase_sensitive", ps)

    @property
    def n_modes(self) -> int:
        return self.phase_insensitive.size

    def family_norms(self):
        """(sum |<a^dag a_Wn>|^2, sum |<a a_Wn>|^2), both conserved by reduction."""
        return (
            float(np.sum(np.abs(self.phase_insensitive) ** 2)),
            float(np.sum(np.abs(self.phase_sensitive) ** 2)),
        )


@dataclass(frozen=True)
class PhaseOp:
    mode: int
    angle: float


@dataclass(frozen=True)
class BeamSplitterOp:
    """Mixes reference modes a and b: a' = sqrt(1-t) a + sqrt(t) b,
    b' = sqrt(t) a - sqrt(1-t) b, with t the logged transmissivity."""

    mode_a: int
    mode_b: int
    transmissivity: float


@dataclass
class UnitaryLog:
    ops: list = field(default_factory=list)

    def add_phase(self, mode: int, angle: float):
        self.ops.append(PhaseOp(mode=mode, angle=angle))

    def add_beam_splitter(self, mode_a: int, mode_b: int, transmissivity: float):
        if not 0.0 <= transmissivity <= 1.0 + 1e-12:
            raise ValueError(f"transmissivity out of range: {transmissivity}")
        self.ops.append(
            BeamSplitterOp(mode_a=mode_a, mode_b=mode_b, transmissivity=min(transmissivity, 1.0))
        )

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)


def _bs_symplectic(transmissivity: float) -> SymplecticTransform:
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    eye = np.eye(2)
    return SymplecticTransform(np.block([[r * eye, t * eye], [t * eye, -r * eye]]))


def _apply_phase(pi, ps, log, mode, angle):
    # a_mode -> exp(i angle) a_mode rotates both families the same way
    if angle == 0.0:
        return
    rot = np.exp(1j * angle)
    pi[mode] *= rot
    ps[mode] *= rot
    log.add_phase(mode, angle)


def _apply_bs_exact(pi, ps, log, a, b, r, t):
    # r, t normalized so the fold target cancels exactly in floating point
    for fam in (pi, ps):
        fa, fb = fam[a], fam[b]
        fam[a] = r * fa + t * fb
        fam[b] = t * fa - r * fb
    log.add_beam_splitter(a, b, t * t)


def _cascade(pi, ps, log, fam, head, tail):
    """Phase-align the family on `head`+`tail`, pivot-swap the largest entry
    to `head`, then fold every tail entry into it.

    Entries below 1e-13 of the family scale are treated as already zero, so
    reapplying the reduction to its own output is a no-op.
    """
    modes = [head] + list(tail)
    scale = max(abs(fam[m]) for m in modes)
    if scale <= _ZERO:
        return
    tol = 1e-13 * scale
    pivot = max(modes, key=lambda m: abs(fam[m]))
    if pivot != head:
        _apply_bs_exact(pi, ps, log, head, pivot, 0.0, 1.0)
    for m in modes:
        ang = float(-np.angle(fam[m]))
        if abs(fam[m]) > tol and abs(ang) > 1e-12:
            _apply_phase(pi, ps, log, m, ang)
    for m in tail:
        target = fam[m].real
        if abs(target) <= tol:
            continue
        pivot_val = fam[head].real
        hyp = np.hypot(pivot_val, target)
        _apply_bs_exact(pi, ps, log, head, m, pivot_val / hyp, target / hyp)


def reduce_correlations(profile: CorrelationProfile):
    """Compress the correlation profile to at most three nonzero entries.

    Returns (reduced, log) where the reduced profile has phase-insensitive
    support only on mode 0 (real, non-negative) and phase-sensitive support
    only on modes 0 and 1 (mode 1 real, non-negative; mode 0 keeps its
    phase, since no reference-mode unitary can realign both families on one
    mode).  Each family's squared magnitude is preserved step by step.
    """
    m = profile.n_modes
    log = UnitaryLog()
    if m == 1:
        return profile, log
    pi = np.array(profile.phase_insensitive, dtype=complex)
    ps = np.array(profile.phase_sensitive, dtype=complex)

    _cascade(pi, ps, log, pi, head=0, tail=range(1, m))
    _cascade(pi, ps, log, ps, head=1, tail=range(2, m))
    return CorrelationProfile(phase_insensitive=pi, phase_sensitive=ps), log


def replay_log(cov: CovarianceMatrix, log: UnitaryLog, reference_offset: int = 1) -> CovarianceMatrix:
    """Apply a recorded reduction to a covariance over (probe, references).

    Logged mode indices are reference-mode indices; `reference_offset` maps
    them into covariance mode numbers (default: probe first, references
    after it).
    """
    out = cov
    for op in log:
        if isinstance(op, PhaseOp):
            out = apply_symplectic(out, phase_shift(op.angle), [op.mode + reference_offset])
        elif isinstance(op, BeamSplitterOp):
            out = apply_symplectic(
                out,
                _bs_symplectic(op.transmissivity),
                [op.mode_a + reference_offset, op.mode_b + reference_offset],
            )
        else:
            raise ValueError(f"unknown log entry {op!r}")
    return out


def profile_from_covariance(cov: CovarianceMatrix, probe: int = 0) -> CorrelationProfile:
    """Extract the probe-to-reference correlation families from a covariance."""
    n = cov.n_modes
    refs = [m for m in range(n) if m != probe]
    pi = np.empty(len(refs), dtype=complex)
    ps = np.empty(len(refs), dtype=complex)
    for k, m in enumerate(refs):
        b = cov.block(probe, m)
        ps[k] = complex((b[0, 0] - b[1, 1]) / 4.0, (b[0, 1] + b[1, 0]) / 4.0)
        pi[k] = complex((b[0, 0] + b[1, 1]) / 4.0, (b[0, 1] - b[1, 0]) / 4.0)
    return CorrelationProfile(phase_insensitive=pi, phase_sensitive=ps)
