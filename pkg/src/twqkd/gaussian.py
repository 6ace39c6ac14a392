"""Covariance-matrix algebra for multimode Gaussian states.

Conventions used throughout the package:

* quadrature ordering is (q_1, p_1, ..., q_n, p_n);
* covariance matrices are vacuum-normalized, i.e. the vacuum state has
  unit variance per quadrature (covariance = identity);
* a thermal state with mean photon number N has covariance (2N+1) I_2;
* symplectic eigenvalues of physical states are >= 1, and the entropy of
  a Gaussian state is sum_k g((nu_k - 1)/2) with g the thermal entropy.

Annihilation-operator moments relate to quadratures via q = a + a^dag,
p = -i (a - a^dag).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

LN2 = float(np.log(2.0))

#: construction-time symmetry tolerance (relative to the largest entry)
SYMMETRY_TOL = 1e-12
#: symplectic eigenvalues may undershoot 1 by this much and still count as physical
PHYSICAL_TOL = 1e-9
#: defect tolerance for S Omega S^T = Omega
SYMPLECTIC_TOL = 1e-10


class NumericalError(RuntimeError):
    """An eigensolve or refinement failed to converge to requested quality."""


def symplectic_form(n_modes: int) -> np.ndarray:
    """Standard symplectic form Omega = diag([[0,1],[-1,0]], ...)."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Real 2n x 2n Wigner covariance matrix, symmetrized on construction.

    Physicality (symplectic spectrum >= 1) is *not* enforced here; use
    :func:`is_physical` or rely on the operations that require it.
    """

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0 or m.shape[0] == 0:
            raise ValueError(f"covariance must be square with even dimension, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        residual = float(np.max(np.abs(m - m.T)))
        if residual > SYMMETRY_TOL * scale:
            raise ValueError(f"covariance not symmetric: residual {residual:.3e} exceeds tolerance")
        sym = 0.5 * (m + m.T)
        sym.setflags(write=False)
        object.__setattr__(self, "mat", sym)

    @property
    def n_modes(self) -> int:
        return self.mat.shape[0] // 2

    def block(self, i: int, j: int) -> np.ndarray:
        """2x2 quadrature block between modes i and j."""
        return self.mat[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]

    def select_modes(self, modes) -> "CovarianceMatrix":
        """Reduced state on the given modes, in the given order."""
        idx = _quad_indices(modes, self.n_modes)
        return CovarianceMatrix(self.mat[np.ix_(idx, idx)])

    def photon_number(self, mode: int) -> float:
        """Mean photon number of one mode."""
        b = self.block(mode, mode)
        return (b[0, 0] + b[1, 1] - 2.0) / 4.0


def _quad_indices(modes, n_modes: int) -> np.ndarray:
    modes = list(modes)
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate mode indices: {modes}")
    for m in modes:
        if not 0 <= m < n_modes:
            raise ValueError(f"mode index {m} out of range for {n_modes} modes")
    return np.array([k for m in modes for k in (2 * m, 2 * m + 1)], dtype=int)


def vacuum_covariance(n_modes: int) -> CovarianceMatrix:
    return CovarianceMatrix(np.eye(2 * n_modes))


def thermal_covariance(n_mean: float, n_modes: int = 1) -> CovarianceMatrix:
    if n_mean < 0:
        raise ValueError(f"mean photon number must be >= 0, got {n_mean}")
    return CovarianceMatrix((2.0 * n_mean + 1.0) * np.eye(2 * n_modes))


def direct_sum(*covs: CovarianceMatrix) -> CovarianceMatrix:
    dim = sum(c.mat.shape[0] for c in covs)
    out = np.zeros((dim, dim))
    k = 0
    for c in covs:
        d = c.mat.shape[0]
        out[k : k + d, k : k + d] = c.mat
        k += d
    return CovarianceMatrix(out)


@dataclass(frozen=True)
class SourceSpec:
    """Per-mode brightness of the entangled source."""

    n_s: float
    c_s: float = field(init=False)

    def __post_init__(self):
        if not np.isfinite(self.n_s) or self.n_s < 0:
            raise ValueError(f"source photon number must be >= 0, got {self.n_s}")
        object.__setattr__(self, "c_s", float(np.sqrt(self.n_s * (self.n_s + 1.0))))


def g_entropy(n_mean):
    """Entropy in bits of a thermal state with the given mean photon number.

    g(N) = (N+1) log2(N+1) - N log2 N, with g(0) = 0.  Accepts scalars or
    arrays; negative input raises.
    """
    n = np.asarray(n_mean, dtype=float)
    if np.any(n < 0) or not np.all(np.isfinite(n)):
        raise ValueError("thermal photon number must be finite and >= 0")
    out = (xlogy(n + 1.0, n + 1.0) - xlogy(n, n)) / LN2
    return float(out) if np.isscalar(n_mean) or out.ndim == 0 else out


def _g_clipped(x: np.ndarray) -> np.ndarray:
    # internal: tolerate tiny negative arguments produced by clamping noise
    x = np.maximum(x, 0.0)
    return (xlogy(x + 1.0, x + 1.0) - xlogy(x, x)) / LN2


def tmsv_covariance(src: SourceSpec) -> CovarianceMatrix:
    """Two-mode squeezed vacuum with per-mode mean photon number n_s."""
    a = 2.0 * src.n_s + 1.0
    c = 2.0 * src.c_s
    z = np.diag([1.0, -1.0])
    m = np.zeros((4, 4))
    m[:2, :2] = a * np.eye(2)
    m[2:, 2:] = a * np.eye(2)
    m[:2, 2:] = c * z
    m[2:, :2] = c * z
    return CovarianceMatrix(m)


def symplectic_eigenvalues(cov: CovarianceMatrix) -> np.ndarray:
    """Symplectic spectrum: n values in descending order.

    These are the |eig(Omega @ cov)| with the +/- pairs merged.  For
    positive-definite input they are extracted through the similar Hermitian
    pencil i L^T Omega L (L the Cholesky factor), whose error scales with
    the eigenvalue itself instead of the matrix norm; indefinite input falls
    back to the plain eigensolve.  Values within PHYSICAL_TOL below 1 are
    clamped up to 1.
    """
    m = cov.mat
    n = cov.n_modes
    omega = symplectic_form(n)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        chol = None
    try:
        if chol is not None:
            ev = np.linalg.eigvalsh(1j * (chol.T @ omega @ chol))
            nu = ev[::-1][:n].astype(float)
        else:
            ev = np.linalg.eigvals(omega @ m)
            v = np.sort(np.abs(ev))[::-1]
            hi, lo = v[0::2], v[1::2]
            mismatch = float(np.max(np.abs(hi - lo) / np.maximum(1.0, hi)))
            if mismatch > 1e-8:
                raise NumericalError(
                    f"eigenvalues did not pair up (mismatch {mismatch:.3e}, "
                    f"norm {np.max(np.abs(m)):.3e}); condition suspect"
                )
            nu = 0.5 * (hi + lo)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symplectic eigensolve failed: {exc}") from exc
    nu = np.where((nu < 1.0) & (nu >= 1.0 - PHYSICAL_TOL), 1.0, nu)
    return nu


def is_physical(cov: CovarianceMatrix):
    """(flag, min symplectic eigenvalue); flag true iff min >= 1 - PHYSICAL_TOL."""
    nu_min = float(symplectic_eigenvalues(cov)[-1])
    return nu_min >= 1.0 - PHYSICAL_TOL, nu_min


def state_entropy(cov: CovarianceMatrix) -> float:
    """Von Neumann entropy in bits; additive over direct sums."""
    nu = symplectic_eigenvalues(cov)
    if nu[-1] < 1.0 - PHYSICAL_TOL:
        raise ValueError(f"state is unphysical: min symplectic eigenvalue {nu[-1]:.12g} < 1")
    return float(np.sum(_g_clipped((np.maximum(nu, 1.0) - 1.0) / 2.0)))


@dataclass(frozen=True)
class SymplecticTransform:
    """Linear quadrature transform S with S Omega S^T = Omega."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
            raise ValueError(f"symplectic matrix must be square with even dimension, got {m.shape}")
        omega = symplectic_form(m.shape[0] // 2)
        defect = float(np.max(np.abs(m @ omega @ m.T - omega)))
        scale = max(1.0, float(np.max(np.abs(m))) ** 2)
        if defect > SYMPLECTIC_TOL * scale:
            raise ValueError(f"matrix is not symplectic: defect {defect:.3e}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def n_modes(self) -> int:
        return self.mat.shape[0] // 2

    def __matmul__(self, other: "SymplecticTransform") -> "SymplecticTransform":
        return SymplecticTransform(self.mat @ other.mat)

    def embed(self, n_modes: int, modes) -> "SymplecticTransform":
        """Embed into an n_modes identity, acting on the given mode subset."""
        modes = list(modes)
        if len(modes) != self.n_modes:
            raise ValueError(f"transform acts on {self.n_modes} modes, got subset {modes}")
        idx = _quad_indices(modes, n_modes)
        full = np.eye(2 * n_modes)
        full[np.ix_(idx, idx)] = self.mat
        return SymplecticTransform(full)


def phase_shift(theta: float) -> SymplecticTransform:
    """Single-mode rotation a -> exp(i theta) a."""
    c, s = np.cos(theta), np.sin(theta)
    return SymplecticTransform(np.array([[c, -s], [s, c]]))


def beam_splitter(transmissivity: float) -> SymplecticTransform:
    """Two-mode mixer: out1 = sqrt(t) in1 + sqrt(1-t) in2 (proper rotation)."""
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity must be in [0, 1], got {transmissivity}")
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    eye = np.eye(2)
    return SymplecticTransform(np.block([[t * eye, r * eye], [-r * eye, t * eye]]))


def two_mode_squeezer(gain: float) -> SymplecticTransform:
    """Two-mode squeezing with out1 = sqrt(G) in1 + sqrt(G-1) in2^dag."""
    if gain < 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")
    c = np.sqrt(gain)
    s = np.sqrt(gain - 1.0)
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    return SymplecticTransform(np.block([[c * eye, s * z], [s * z, c * eye]]))


def single_mode_squeezer(r: float) -> SymplecticTransform:
    """Quadrature squeeze q -> exp(-r) q, p -> exp(r) p."""
    return SymplecticTransform(np.diag([np.exp(-r), np.exp(r)]))


def apply_symplectic(cov: CovarianceMatrix, s: SymplecticTransform, modes=None) -> CovarianceMatrix:
    """cov -> S cov S^T, with S acting on a subset of modes (default: all)."""
    if modes is None:
        if s.n_modes != cov.n_modes:
            raise ValueError(f"transform has {s.n_modes} modes, state has {cov.n_modes}")
        full = s.mat
    else:
        full = s.embed(cov.n_modes, modes).mat
    return CovarianceMatrix(full @ cov.mat @ full.T)


def covariance_from_moments(number_moments: np.ndarray, pair_moments: np.ndarray) -> CovarianceMatrix:
    """Covariance of a zero-mean state from its annihilation-operator moments.

    number_moments[i, j] = <a_i^dag a_j> (Hermitian), pair_moments[i, j] =
    <a_i a_j> (symmetric).
    """
    nm = np.asarray(number_moments, dtype=complex)
    pm = np.asarray(pair_moments, dtype=complex)
    if nm.shape != pm.shape or nm.ndim != 2 or nm.shape[0] != nm.shape[1]:
        raise ValueError("moment matrices must be square and of equal shape")
    if np.max(np.abs(nm - nm.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(nm))):
        raise ValueError("number moments must be Hermitian")
    if np.max(np.abs(pm - pm.T)) > 1e-10 * max(1.0, np.max(np.abs(pm))):
        raise ValueError("pair moments must be symmetric")
    n = nm.shape[0]
    out = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(i, n):
            m = pm[i, j]
            if i == j:
                blk = (1.0 + 2.0 * nm[i, i].real) * np.eye(2) + 2.0 * np.array(
                    [[m.real, m.imag], [m.imag, -m.real]]
                )
            else:
                c = nm[i, j]
                blk = 2.0 * np.array(
                    [
                        [m.real + c.real, m.imag + c.imag],
                        [m.imag - c.imag, -m.real + c.real],
                    ]
                )
            out[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = blk
            out[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] = blk.T
    return CovarianceMatrix(out)


def moments_from_covariance(cov: CovarianceMatrix):
    """Inverse of :func:`covariance_from_moments`: (number, pair) matrices."""
    n = cov.n_modes
    nm = np.zeros((n, n), dtype=complex)
    pm = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            b = cov.block(i, j)
            pm[i, j] = complex((b[0, 0] - b[1, 1]) / 4.0, (b[0, 1] + b[1, 0]) / 4.0)
            if i == j:
                nm[i, i] = (b[0, 0] + b[1, 1] - 2.0) / 4.0
            else:
                nm[i, j] = complex((b[0, 0] + b[1, 1]) / 4.0, (b[0, 1] - b[1, 0]) / 4.0)
    return nm, pm
