"""Secret-key-efficiency calculators for two protocol families.

Both protocols share the rate expression SKE = max(beta I_AB - M_E chi_E, 0)
in bits/symbol (SKR = R * SKE in bits/s): an entangled-source protocol with
random displacement encoding and single-mode symbols, and a floodlight-style
protocol with multi-mode symbols and a high-gain amplifier in the encoding
terminal.  The Shannon term for the floodlight protocol is injected (a table
of I_AB values, a table of symbol error probabilities, or a callable
brightness-dependent error model); this module never derives it from the
security analysis.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from . import bounds
from .channels import ChannelModel, EncodingSpec
from .gaussian import SourceSpec

VARIANT_TMSV = "tmsv"
VARIANT_FLQKD = "flqkd"

IAB_HEADER = ("L_km", "I_AB_bits_per_symbol")
ERROR_HEADER = ("L_km", "error_prob")


@dataclass(frozen=True)
class LinkModel:
    """Fiber link: one-way length and loss slope (0.2 dB/km default)."""

    length_km: float
    loss_db_per_km: float = 0.2

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError(f"length must be >= 0, got {self.length_km}")
        if self.loss_db_per_km < 0:
            raise ValueError(f"loss must be >= 0 dB/km, got {self.loss_db_per_km}")

    @property
    def kappa_s(self) -> float:
        return 10.0 ** (-self.loss_db_per_km * self.length_km / 10.0)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def plob(kappa_s: float) -> float:
    """Repeaterless bound -log2(1 - kappa_s) bits/mode; inf at kappa_s = 1."""
    if not 0.0 <= kappa_s <= 1.0:
        raise ValueError(f"transmissivity out of range: {kappa_s}")
    if kappa_s == 1.0:
        return float("inf")
    return float(-np.log2(1.0 - kappa_s))


# ---------------------------------------------------------------------------
# Shannon-information models for the floodlight protocol


def _match_length(lengths: np.ndarray, length_km: float) -> int:
    hits = np.nonzero(np.isclose(lengths, length_km, rtol=0.0, atol=1e-6))[0]
    if hits.size == 0:
        raise ValueError(f"no I_AB data for L = {length_km} km")
    return int(hits[0])


@dataclass(frozen=True)
class IabTable:
    """Explicit per-length Shannon information in bits/symbol."""

    lengths_km: np.ndarray
    i_ab_bits: np.ndarray

    def __post_init__(self):
        l = np.asarray(self.lengths_km, dtype=float)
        v = np.asarray(self.i_ab_bits, dtype=float)
        if l.ndim != 1 or l.shape != v.shape or l.size == 0:
            raise ValueError("table columns must be 1-D, equal length, non-empty")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("I_AB values must be finite and >= 0")
        object.__setattr__(self, "lengths_km", l)
        object.__setattr__(self, "i_ab_bits", v)

    def i_ab(self, length_km: float, n_s: float) -> float:
        return float(self.i_ab_bits[_match_length(self.lengths_km, length_km)])


@dataclass(frozen=True)
class BscErrorTable:
    """Per-length symbol error probability; I_AB = 1 - h2(p)."""

    lengths_km: np.ndarray
    error_probs: np.ndarray

    def __post_init__(self):
        l = np.asarray(self.lengths_km, dtype=float)
        p = np.asarray(self.error_probs, dtype=float)
        if l.ndim != 1 or l.shape != p.shape or l.size == 0:
            raise ValueError("table columns must be 1-D, equal length, non-empty")
        if np.any(p < 0) or np.any(p > 0.5):
            raise ValueError("error probabilities must lie in [0, 0.5]")
        object.__setattr__(self, "lengths_km", l)
        object.__setattr__(self, "error_probs", p)

    def i_ab(self, length_km: float, n_s: float) -> float:
        return 1.0 - binary_entropy(float(self.error_probs[_match_length(self.lengths_km, length_km)]))


@dataclass(frozen=True)
class BscErrorModel:
    """Brightness-dependent symbol error model p(L, n_s); enables the per-length
    source-brightness optimization."""

    error_prob: object  # callable (length_km, n_s) -> probability

    def i_ab(self, length_km: float, n_s: float) -> float:
        p = float(self.error_prob(length_km, n_s))
        if not 0.0 <= p <= 0.5:
            raise ValueError(f"error model returned {p}, outside [0, 0.5]")
        return 1.0 - binary_entropy(p)


def load_iab_csv(path):
    """Read an I_AB or error-probability table; header selects the format."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"empty table file: {path}")
    header = tuple(h.strip() for h in rows[0])
    body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    if body.ndim != 2 or body.shape[1] != 2:
        raise ValueError(f"table must have two columns, got shape {body.shape}")
    if header == IAB_HEADER:
        return IabTable(lengths_km=body[:, 0], i_ab_bits=body[:, 1])
    if header == ERROR_HEADER:
        return BscErrorTable(lengths_km=body[:, 0], error_probs=body[:, 1])
    raise ValueError(f"unrecognized table header {header!r}")


def flqkd_reference_error_prob(
    length_km: float,
    n_s: float,
    gain: float,
    modes_per_symbol: int,
    loss_db_per_km: float = 0.2,
) -> float:
    """Stand-in link-budget error model for the floodlight protocol.

    Binary phase encoding read out by correlating the returned light with a
    bright retained reference: per-symbol SNR is the coherent gain of
    modes_per_symbol modes over the amplified-background beat noise,

        snr = M kappa^2 G n_s / (kappa^2 G n_s + kappa (G - 1) + 1),

    and p = Q(sqrt(snr)).  This lands near the headline throughput of the
    published floodlight analyses at the 50 km operating point but is a
    model, not a measurement; substitute a measured table where available.
    """
    kappa = 10.0 ** (-loss_db_per_km * length_km / 10.0)
    signal = kappa * kappa * gain * n_s
    noise = signal + kappa * (gain - 1.0) + 1.0
    snr = modes_per_symbol * signal / noise
    return float(0.5 * erfc(np.sqrt(snr / 2.0)))


# ---------------------------------------------------------------------------
# protocol configuration and reports


@dataclass(frozen=True)
class ProtocolConfig:
    variant: str
    src: SourceSpec
    enc: EncodingSpec
    gain: float = 1.0
    beta: float = 1.0
    symbol_rate: float = 1e10
    i_ab_model: object | None = None

    def __post_init__(self):
        if self.variant not in (VARIANT_TMSV, VARIANT_FLQKD):
            raise ValueError(f"unknown protocol variant {self.variant!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"reconciliation efficiency must be in (0, 1], got {self.beta}")
        if self.symbol_rate <= 0:
            raise ValueError(f"symbol rate must be > 0, got {self.symbol_rate}")
        if self.variant == VARIANT_TMSV and self.enc.m_e != 1:
            raise ValueError("the displacement protocol encodes one mode per symbol")
        if self.variant == VARIANT_FLQKD and self.gain < 1.0:
            raise ValueError(f"amplifier gain must be >= 1, got {self.gain}")

    def channel(self) -> ChannelModel:
        if self.variant == VARIANT_TMSV:
            return ChannelModel.identity()
        return ChannelModel.amplifier(self.gain)


@dataclass(frozen=True)
class SkeReport:
    length_km: float
    kappa_s: float
    kappa_f_used: float
    i_ab: float
    chi_e: float
    ske: float
    skr: float
    n_s: float

    @classmethod
    def build(cls, cfg: ProtocolConfig, link: LinkModel, kappa_f_used, i_ab, chi_e, n_s):
        ske = max(cfg.beta * i_ab - cfg.enc.m_e * chi_e, 0.0)
        return cls(
            length_km=link.length_km,
            kappa_s=link.kappa_s,
            kappa_f_used=float(kappa_f_used),
            i_ab=float(i_ab),
            chi_e=float(chi_e),
            ske=float(ske),
            skr=float(cfg.symbol_rate * ske),
            n_s=float(n_s),
        )


def tmsv_information(kappa_s: float, n_s: float, e_x: float) -> float:
    """Dual-homodyne Shannon information of the displacement protocol."""
    return float(np.log2(kappa_s * e_x + kappa_s**2 * n_s + 1.0))


def tmsv_ske(
    cfg: ProtocolConfig,
    link: LinkModel,
    kappa_s_bar: float | None = None,
    kappa_f_bar: float | None = None,
) -> SkeReport:
    """Displacement-protocol rate: closed-form I_AB at the link transmissivity,
    information bound at the supplied intrusion parameters (default: an
    attack that leaves the covariance intact, kappa bars equal to the link)."""
    if cfg.variant != VARIANT_TMSV:
        raise ValueError("config is not for the displacement protocol")
    ks = link.kappa_s if kappa_s_bar is None else kappa_s_bar
    kf = ks if kappa_f_bar is None else kappa_f_bar
    chi = bounds.chi_E(cfg.src, cfg.enc, ks, kf, cfg.channel())
    i_ab = tmsv_information(link.kappa_s, cfg.src.n_s, cfg.enc.e_x)
    return SkeReport.build(cfg, link, kf, i_ab, chi, cfg.src.n_s)


def flqkd_ske(
    cfg: ProtocolConfig,
    link: LinkModel,
    kappa_s_bar: float | None = None,
    k_f_bar: float | None = None,
    n_s: float | None = None,
) -> SkeReport:
    """Floodlight-protocol rate at one length and brightness.

    The information bound is evaluated at the permutation-invariant
    intrusion pair (the three-reference-mode maximization collapses to the
    pair-wise bound, so the pair-wise evaluator is used directly); the
    Shannon term comes from the configured model.
    """
    if cfg.variant != VARIANT_FLQKD:
        raise ValueError("config is not for the floodlight protocol")
    if cfg.i_ab_model is None:
        raise ValueError("floodlight evaluation requires an i_ab_model")
    src = cfg.src if n_s is None else SourceSpec(n_s)
    ks = link.kappa_s if kappa_s_bar is None else kappa_s_bar
    kf = ks if k_f_bar is None else k_f_bar
    chi = bounds.chi_E(src, cfg.enc, ks, kf, cfg.channel())
    i_ab = cfg.i_ab_model.i_ab(link.length_km, src.n_s)
    return SkeReport.build(cfg, link, kf, i_ab, chi, src.n_s)


def _golden_section_max(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200):
    """Deterministic golden-section maximizer on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    iterations = 0
    while b - a > tol and iterations < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        iterations += 1
    x = c if fc >= fd else d
    return x, max(fc, fd), iterations


def optimize_flqkd_brightness(
    cfg: ProtocolConfig,
    link: LinkModel,
    kappa_s_bar: float | None = None,
    k_f_bar: float | None = None,
    log10_bracket=(-4.0, 0.0),
    tol: float = 1e-6,
):
    """Pick the source brightness maximizing SKE at one length.

    Golden-section search over log10(n_s) on the given bracket; returns
    (report at the optimum, certificate with the bracket and iterations).
    """
    if cfg.variant != VARIANT_FLQKD:
        raise ValueError("config is not for the floodlight protocol")

    def ske_of(x):
        return flqkd_ske(cfg, link, kappa_s_bar, k_f_bar, n_s=10.0**x).ske

    x, _, iterations = _golden_section_max(ske_of, log10_bracket[0], log10_bracket[1], tol=tol)
    report = flqkd_ske(cfg, link, kappa_s_bar, k_f_bar, n_s=10.0**x)
    certificate = {
        "log10_bracket": tuple(log10_bracket),
        "tol": tol,
        "iterations": iterations,
        "log10_n_s": float(x),
    }
    return report, certificate


def tmsv_ske_curve(cfg: ProtocolConfig, lengths_km) -> list:
    return [tmsv_ske(cfg, LinkModel(l, 0.2)) for l in lengths_km]


def _flqkd_point(args):
    (variant, n_s, e_x, m_e, gain, beta, rate, model, length, optimize, bracket) = args
    cfg = ProtocolConfig(
        variant=variant,
        src=SourceSpec(n_s),
        enc=EncodingSpec(e_x, m_e),
        gain=gain,
        beta=beta,
        symbol_rate=rate,
        i_ab_model=model,
    )
    link = LinkModel(length, 0.2)
    if optimize:
        report, _ = optimize_flqkd_brightness(cfg, link, log10_bracket=bracket)
        return report
    return flqkd_ske(cfg, link)


def flqkd_ske_curve(
    cfg: ProtocolConfig,
    lengths_km,
    optimize_brightness: bool = True,
    log10_bracket=(-4.0, 0.0),
    workers: int = 1,
) -> list:
    """Per-length floodlight rates, optionally optimizing n_s at each length.

    Results are ordered by the input lengths regardless of worker count.
    """
    args = [
        (
            cfg.variant,
            cfg.src.n_s,
            cfg.enc.e_x,
            cfg.enc.m_e,
            cfg.gain,
            cfg.beta,
            cfg.symbol_rate,
            cfg.i_ab_model,
            float(l),
            optimize_brightness,
            tuple(log10_bracket),
        )
        for l in lengths_km
    ]
    if workers <= 1 or len(args) < 4:
        return [_flqkd_point(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_flqkd_point, args, chunksize=4))
