"""Synthetic heterodyne records from a Gaussian attack, and intrusion estimators.

Each record holds one heterodyne amplitude pair (alpha_S, alpha_W) drawn
from the Husimi distribution of the joint probe/reference state: a real
Gaussian vector with covariance (cov + I)/4 in quadrature units, so that
mean |alpha|^2 = <a^dag a> + 1 and the complex cross moments reproduce
<a_S a_W> and <a_S^dag a_W> without bias.

Randomness is counter-based (Philox keyed by the seed, one counter block of
four 64-bit words per record), so generation is reproducible and
order-independent: any contiguous index range can be produced in isolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .attacks import AttackParameters, OptimalAttackPoint, attack_covariance
from .gaussian import CovarianceMatrix, SourceSpec

_N_BATCHES = 16
_MIN_RECORDS = 100


@dataclass(frozen=True)
class MeasurementRecord:
    pair_index: int
    alpha_s: complex
    alpha_w: complex


@dataclass
class RecordBatch:
    """Columnar record storage; iterates as MeasurementRecord values."""

    pair_index: np.ndarray
    alpha_s: np.ndarray
    alpha_w: np.ndarray

    def __post_init__(self):
        self.pair_index = np.asarray(self.pair_index, dtype=np.int64)
        self.alpha_s = np.asarray(self.alpha_s, dtype=complex)
        self.alpha_w = np.asarray(self.alpha_w, dtype=complex)
        if not (self.pair_index.shape == self.alpha_s.shape == self.alpha_w.shape):
            raise ValueError("record columns must have equal length")
        if not (
            np.all(np.isfinite(self.alpha_s.view(float)))
            and np.all(np.isfinite(self.alpha_w.view(float)))
        ):
            raise ValueError("record amplitudes must be finite")

    def __len__(self):
        return self.pair_index.size

    def __iter__(self):
        for k in range(len(self)):
            yield MeasurementRecord(
                int(self.pair_index[k]), complex(self.alpha_s[k]), complex(self.alpha_w[k])
            )


@dataclass(frozen=True)
class SpdcTap:
    """Fraction of the transmitted light originating from the entangled
    source; cross moments against the retained idler scale by sqrt(tau)."""

    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tap fraction must be in (0, 1], got {self.tau}")


@dataclass
class IntrusionEstimate:
    kappa_s_bar: float
    kappa_f_lower: float
    k_f_lower: float
    n_samples: int
    std_errors: dict = field(default_factory=dict)


def _attack_cov(src: SourceSpec, attack) -> CovarianceMatrix:
    if isinstance(attack, AttackParameters):
        return attack_covariance(src, attack)
    if isinstance(attack, OptimalAttackPoint):
        return attack.cov_sw
    if isinstance(attack, CovarianceMatrix):
        if attack.n_modes != 2:
            raise ValueError("attack covariance must cover exactly (probe, reference)")
        return attack
    raise TypeError(f"unsupported attack specification: {type(attack).__name__}")


def _tapped(cov: CovarianceMatrix, tap: SpdcTap | None) -> CovarianceMatrix:
    if tap is None or tap.tau == 1.0:
        return cov
    # reference passes a beam splitter of transmissivity tau against vacuum
    m = np.array(cov.mat)
    rt = np.sqrt(tap.tau)
    m[:2, 2:] *= rt
    m[2:, :2] *= rt
    m[2:, 2:] = tap.tau * m[2:, 2:] + (1.0 - tap.tau) * np.eye(2)
    return CovarianceMatrix(m)


def _record_normals(seed: int, start_index: int, n: int) -> np.ndarray:
    """(n, 4) standard normals; row k depends only on (seed, start_index + k)."""
    bitgen = np.random.Philox(key=seed, counter=[start_index, 0, 0, 0])
    raw = bitgen.random_raw(4 * n).reshape(n, 4)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def simulate_attack_records(
    src: SourceSpec,
    attack,
    n_pairs: int,
    seed: int,
    tap: SpdcTap | None = None,
    start_index: int = 0,
) -> RecordBatch:
    """Heterodyne amplitude pairs for n_pairs uses of the attacked channel."""
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    cov = _tapped(_attack_cov(src, attack), tap)
    sigma = (cov.mat + np.eye(4)) / 4.0
    chol = np.linalg.cholesky(sigma)
    z = _record_normals(seed, start_index, n_pairs)
    x = z @ chol.T
    return RecordBatch(
        pair_index=np.arange(start_index, start_index + n_pairs, dtype=np.int64),
        alpha_s=x[:, 0] + 1j * x[:, 1],
        alpha_w=x[:, 2] + 1j * x[:, 3],
    )


def _estimate_arrays(alpha_s, alpha_w, src: SourceSpec, tau: float):
    kappa_s = float(np.mean(np.abs(alpha_s) ** 2) - 1.0) / src.n_s
    m_hat = np.mean(alpha_s * alpha_w) / np.sqrt(tau)
    n_hat = np.mean(np.conj(alpha_s) * alpha_w) / np.sqrt(tau)
    kappa_f = float(np.abs(m_hat) ** 2 + np.abs(n_hat) ** 2) / src.c_s**2
    return kappa_s, kappa_f


def estimate_intrusion(records: RecordBatch, src: SourceSpec, tap: SpdcTap | None = None) -> IntrusionEstimate:
    """Intrusion parameters from heterodyne records.

    kappa_s_bar comes from the vacuum-corrected mean photon number of the
    probe amplitudes; the cross-correlation parameters come from the squared
    magnitudes of the averaged complex cross moments, which lower-bound both
    the pair-wise and permutation-invariant correlation strengths (averaging
    before taking magnitudes can only lose phase coherence, and the tap
    fraction is divided back out).  Standard errors use 16 contiguous batch
    means.
    """
    n = len(records)
    if n < _MIN_RECORDS:
        raise ValueError(f"need at least {_MIN_RECORDS} records, got {n}")
    if src.n_s <= 0:
        raise ValueError("estimation requires a bright source (n_s > 0)")
    tau = tap.tau if tap is not None else 1.0

    kappa_s, kappa_f = _estimate_arrays(records.alpha_s, records.alpha_w, src, tau)

    edges = np.linspace(0, n, _N_BATCHES + 1, dtype=int)
    batch_ks, batch_kf = [], []
    for b in range(_N_BATCHES):
        sl = slice(edges[b], edges[b + 1])
        ks_b, kf_b = _estimate_arrays(records.alpha_s[sl], records.alpha_w[sl], src, tau)
        batch_ks.append(ks_b)
        batch_kf.append(kf_b)
    se_ks = float(np.std(batch_ks, ddof=1) / np.sqrt(_N_BATCHES))
    se_kf = float(np.std(batch_kf, ddof=1) / np.sqrt(_N_BATCHES))

    return IntrusionEstimate(
        kappa_s_bar=kappa_s,
        kappa_f_lower=kappa_f,
        k_f_lower=kappa_f,
        n_samples=n,
        std_errors={"kappa_s_bar": se_ks, "kappa_f_lower": se_kf, "k_f_lower": se_kf},
    )


# ---------------------------------------------------------------------------
# JSON-lines serialization


def write_records_jsonl(records: RecordBatch, path):
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(len(records)):
            fh.write(
                json.dumps(
                    {
                        "pair_index": int(records.pair_index[k]),
                        "alpha_S": [records.alpha_s[k].real, records.alpha_s[k].imag],
                        "alpha_W": [records.alpha_w[k].real, records.alpha_w[k].imag],
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_records_jsonl(path) -> RecordBatch:
    idx, a_s, a_w = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                idx.append(int(obj["pair_index"]))
                a_s.append(complex(obj["alpha_S"][0], obj["alpha_S"][1]))
                a_w.append(complex(obj["alpha_W"][0], obj["alpha_W"][1]))
            except (KeyError, ValueError, TypeError, IndexError) as exc:
                raise ValueError(f"malformed record on line {line_no}: {exc}") from exc
    return RecordBatch(
        pair_index=np.array(idx, dtype=np.int64),
        alpha_s=np.array(a_s, dtype=complex),
        alpha_w=np.array(a_w, dtype=complex),
    )
