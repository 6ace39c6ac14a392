"""Configuration-driven batch front-end.

Every command reads one flat JSON config (schema_version 1, unknown keys
rejected, fully validated before any computation) and writes CSV or JSON
into the output directory.  Outputs are deterministic for a fixed config
and seed: floats are printed with 17 significant digits and each file
carries a comment header with the tool version and the config hash.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, bounds, estimation, protocols, reduction
from .attacks import AttackParameters, kappa_f_range, stationary_minimum_bound
from .channels import ChannelModel, EncodingSpec, output_photon_number
from .gaussian import NumericalError, SourceSpec, g_entropy

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# config schema


@dataclass(frozen=True)
class Field:
    typ: type
    required: bool = False
    default: object = None
    check: object = None
    doc: str = ""


def _positive(x):
    return x > 0


def _non_negative(x):
    return x >= 0


def _fraction(x):
    return 0.0 < x <= 1.0


def _number_list(x):
    return isinstance(x, list) and len(x) > 0 and all(isinstance(v, (int, float)) for v in x)


_CHANNEL_FIELDS = {
    "channel_kind": Field(str, required=True, check=lambda v: v in ("amplifier", "loss", "contra_amplifier")),
    "channel_gain": Field(float, default=1.0, check=lambda v: v >= 1.0),
    "channel_transmissivity": Field(float, default=1.0, check=_fraction),
}

SCHEMAS = {
    "chi-e": {
        "source_n_s": Field(float, required=True, check=_positive),
        "encoding_e_x": Field(float, default=0.0, check=_non_negative),
        "encoding_m_e": Field(int, default=1, check=_positive),
        **_CHANNEL_FIELDS,
        "kappa_s_start": Field(float, required=True, check=_non_negative),
        "kappa_s_stop": Field(float, required=True, check=_non_negative),
        "kappa_s_count": Field(int, required=True, check=_positive),
        "kappa_f_count": Field(int, required=True, check=_positive),
        "kappa_f_start": Field(float, default=0.0, check=_non_negative),
        "restrict_stationary_bound": Field(bool, default=False),
        "grid_zeta": Field(int, default=33, check=_positive),
        "grid_delta": Field(int, default=33, check=_positive),
        "grid_xi": Field(int, default=33, check=_positive),
    },
    "convexity": {
        "source_n_s": Field(float, required=True, check=_positive),
        **_CHANNEL_FIELDS,
        "kappa_s_start": Field(float, required=True, check=_non_negative),
        "kappa_s_stop": Field(float, required=True, check=_non_negative),
        "kappa_s_count": Field(int, required=True, check=_positive),
        "kappa_f_start": Field(float, default=0.0, check=_non_negative),
        "kappa_f_stop": Field(float, required=True, check=_non_negative),
        "kappa_f_count": Field(int, required=True, check=_positive),
        "slack": Field(float, default=1e-9, check=_positive),
    },
    "theorem2": {
        "source_n_s": Field(float, required=True, check=_positive),
        "encoding_e_x": Field(float, default=0.0, check=_non_negative),
        "encoding_m_e": Field(int, default=1, check=_positive),
        **_CHANNEL_FIELDS,
        "kappa_s_values": Field(list, required=True, check=_number_list),
        "k_f_values": Field(list, required=True, check=_number_list),
    },
    "ske-curve": {
        "protocol": Field(str, required=True, check=lambda v: v in ("tmsv", "flqkd")),
        "source_n_s": Field(float, required=True, check=_positive),
        "encoding_e_x": Field(float, default=0.0, check=_non_negative),
        "encoding_m_e": Field(int, default=1, check=_positive),
        "gain": Field(float, default=1.0, check=lambda v: v >= 1.0),
        "beta": Field(float, default=1.0, check=_fraction),
        "symbol_rate": Field(float, default=1e10, check=_positive),
        "length_start_km": Field(float, required=True, check=_non_negative),
        "length_stop_km": Field(float, required=True, check=_non_negative),
        "length_step_km": Field(float, required=True, check=_positive),
        "iab_table": Field(str, default=None),
        "use_reference_error_model": Field(bool, default=False),
        "optimize_brightness": Field(bool, default=False),
        "log10_ns_min": Field(float, default=-4.0),
        "log10_ns_max": Field(float, default=0.0),
    },
    "reduce": {
        "profile": Field(str, required=True),
    },
    "simulate": {
        "source_n_s": Field(float, required=True, check=_positive),
        "kappa_s": Field(float, required=True, check=_non_negative),
        "kappa_f": Field(float, required=True, check=_non_negative),
        "zeta": Field(float, default=np.pi / 2),
        "delta": Field(float, default=np.pi / 2),
        "xi": Field(float, default=0.0),
        "n_pairs": Field(int, required=True, check=_positive),
        "tap_tau": Field(float, default=1.0, check=_fraction),
    },
    "estimate": {
        "records": Field(str, required=True),
        "source_n_s": Field(float, required=True, check=_positive),
        "tap_tau": Field(float, default=1.0, check=_fraction),
    },
    "first-order": {
        "source_n_s": Field(float, required=True, check=_positive),
        **_CHANNEL_FIELDS,
        "kappa_s_values": Field(list, required=True, check=_number_list),
        "step": Field(float, default=1e-5, check=_positive),
        "grid_zeta": Field(int, default=21, check=_positive),
        "grid_delta": Field(int, default=21, check=_positive),
        "grid_xi": Field(int, default=21, check=_positive),
    },
}


def load_config(path: str, command: str) -> dict:
    schema = SCHEMAS[command]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ValueError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    if raw.get("schema_version") != 1:
        raise ValueError("config must declare schema_version = 1")
    unknown = set(raw) - set(schema) - {"schema_version"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = {}
    for key, spec in schema.items():
        if key in raw:
            val = raw[key]
            if spec.typ is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if spec.typ is float and isinstance(val, bool):
                raise ValueError(f"config key {key}: expected number, got bool")
            if spec.typ is int and (isinstance(val, bool) or not isinstance(val, int)):
                raise ValueError(f"config key {key}: expected integer")
            if not isinstance(val, spec.typ) and val is not None:
                raise ValueError(f"config key {key}: expected {spec.typ.__name__}")
            if spec.check is not None and val is not None and not spec.check(val):
                raise ValueError(f"config key {key}: value {val!r} fails validation")
            cfg[key] = val
        elif spec.required:
            raise ValueError(f"missing required config key: {key}")
        else:
            cfg[key] = spec.default
    return cfg


def _channel_from(cfg: dict) -> ChannelModel:
    return ChannelModel(
        cfg["channel_kind"],
        gain=cfg["channel_gain"],
        transmissivity=cfg["channel_transmissivity"],
    )


# ---------------------------------------------------------------------------
# output writers


def _write_csv(path, header_comment, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header_comment + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, header, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"meta": header, "data": payload}, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _emit(out_dir, name, meta_comment, meta, columns, rows, fmt):
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        path = os.path.join(out_dir, name + ".csv")
        _write_csv(path, meta_comment, columns, rows)
    else:
        path = os.path.join(out_dir, name + ".json")
        payload = [dict(zip(columns, (float(v) for v in row))) for row in rows]
        _write_json(path, meta, payload)
    return path


# ---------------------------------------------------------------------------
# commands


def _meta(command, cfg, seed):
    h = _config_hash(cfg)
    comment = f"# twqkd {__version__} command={command} config_sha256={h} seed={seed}"
    return comment, {"tool": f"twqkd {__version__}", "command": command, "config_sha256": h, "seed": seed}


def cmd_chi_e(cfg, out_dir, seed, workers, fmt):
    src = SourceSpec(cfg["source_n_s"])
    enc = EncodingSpec(cfg["encoding_e_x"], cfg["encoding_m_e"])
    channel = _channel_from(cfg)
    grid = (cfg["grid_zeta"], cfg["grid_delta"], cfg["grid_xi"])
    points = []
    for ks in np.linspace(cfg["kappa_s_start"], cfg["kappa_s_stop"], cfg["kappa_s_count"]):
        _, hi = kappa_f_range(ks, src)
        if cfg["restrict_stationary_bound"]:
            hi = min(hi, stationary_minimum_bound(ks, src))
        if hi < cfg["kappa_f_start"]:
            continue
        for kf in np.linspace(cfg["kappa_f_start"], hi, cfg["kappa_f_count"]):
            points.append((float(ks), float(kf)))
    if not points:
        raise ValueError("chi-e sweep grid is empty")

    rows = []
    for ks, kf in points:
        res = bounds.min_entropy_gain(src, ks, kf, channel, grid_shape=grid)
        chi = g_entropy(output_photon_number(ks * src.n_s, channel, enc)) - res.e_star
        rows.append((ks, kf, res.e_star, chi, res.argmin.zeta, res.argmin.delta))
    comment, meta = _meta("chi-e", cfg, seed)
    columns = ("kappa_S", "kappa_f", "E_star", "chi_E", "zeta_opt", "delta_opt")
    return [_emit(out_dir, "chi_e", comment, meta, columns, rows, fmt)]


def cmd_convexity(cfg, out_dir, seed, workers, fmt):
    src = SourceSpec(cfg["source_n_s"])
    channel = _channel_from(cfg)
    report = bounds.convexity_scan(
        src,
        channel,
        np.linspace(cfg["kappa_s_start"], cfg["kappa_s_stop"], cfg["kappa_s_count"]),
        np.linspace(cfg["kappa_f_start"], cfg["kappa_f_stop"], cfg["kappa_f_count"]),
        slack=cfg["slack"],
        workers=workers,
    )
    comment, meta = _meta("convexity", cfg, seed)
    rows = []
    for i, ks in enumerate(report.kappa_s_values):
        for j, kf in enumerate(report.kappa_f_values):
            if np.isfinite(report.e_star[i, j]):
                rows.append((ks, kf, report.e_star[i, j]))
    paths = [_emit(out_dir, "convexity_surface", comment, meta, ("kappa_S", "kappa_f", "E_star"), rows, fmt)]
    summary = {
        "n_points": report.n_points,
        "n_triples": report.n_triples,
        "n_violations": len(report.violations),
        "max_excess": report.max_excess,
        "violations": [
            {
                "kappa_s_mid": v.kappa_s_mid,
                "kappa_f_mid": v.kappa_f_mid,
                "direction": list(v.direction),
                "span": v.span,
                "excess": v.excess,
            }
            for v in report.violations
        ],
    }
    path = os.path.join(out_dir, "convexity_report.json")
    _write_json(path, meta, summary)
    paths.append(path)
    return paths


def cmd_theorem2(cfg, out_dir, seed, workers, fmt):
    src = SourceSpec(cfg["source_n_s"])
    enc = EncodingSpec(cfg["encoding_e_x"], cfg["encoding_m_e"])
    channel = _channel_from(cfg)
    ks_list, kf_list = cfg["kappa_s_values"], cfg["k_f_values"]
    if len(ks_list) != len(kf_list):
        raise ValueError("kappa_s_values and k_f_values must pair up")
    rows = []
    for ks, kf in zip(ks_list, kf_list):
        r2 = bounds.chi_E_prime(src, enc, ks, kf, channel)
        chi = bounds.chi_E(src, enc, ks, kf, channel)
        rows.append((ks, kf, r2.value, chi, r2.value - chi, r2.b1_squared))
    comment, meta = _meta("theorem2", cfg, seed)
    columns = ("kappa_S", "K_f", "chi_E_prime", "chi_E", "difference", "b1_sq_opt")
    return [_emit(out_dir, "theorem2", comment, meta, columns, rows, fmt)]


def cmd_ske_curve(cfg, out_dir, seed, workers, fmt):
    lengths = np.arange(
        cfg["length_start_km"], cfg["length_stop_km"] + 1e-9, cfg["length_step_km"]
    )
    if lengths.size == 0:
        raise ValueError("length sweep is empty")
    src = SourceSpec(cfg["source_n_s"])
    enc = EncodingSpec(cfg["encoding_e_x"], cfg["encoding_m_e"])
    if cfg["protocol"] == "tmsv":
        pcfg = protocols.ProtocolConfig(
            protocols.VARIANT_TMSV, src, enc, beta=cfg["beta"], symbol_rate=cfg["symbol_rate"]
        )
        reports = protocols.tmsv_ske_curve(pcfg, lengths)
    else:
        if cfg["iab_table"] is not None:
            if not os.path.exists(cfg["iab_table"]):
                raise ValueError(f"I_AB table not found: {cfg['iab_table']}")
            model = protocols.load_iab_csv(cfg["iab_table"])
        elif cfg["use_reference_error_model"]:
            gain, m_e = cfg["gain"], cfg["encoding_m_e"]
            model = protocols.BscErrorModel(
                lambda length, n_s: protocols.flqkd_reference_error_prob(length, n_s, gain, m_e)
            )
        else:
            raise ValueError("floodlight sweep needs iab_table or use_reference_error_model")
        pcfg = protocols.ProtocolConfig(
            protocols.VARIANT_FLQKD,
            src,
            enc,
            gain=cfg["gain"],
            beta=cfg["beta"],
            symbol_rate=cfg["symbol_rate"],
            i_ab_model=model,
        )
        reports = protocols.flqkd_ske_curve(
            pcfg,
            lengths,
            optimize_brightness=cfg["optimize_brightness"],
            log10_bracket=(cfg["log10_ns_min"], cfg["log10_ns_max"]),
            workers=workers,
        )
    rows = [
        (r.length_km, r.kappa_s, r.i_ab, r.chi_e, r.ske, r.skr, protocols.plob(r.kappa_s))
        for r in reports
    ]
    comment, meta = _meta("ske-curve", cfg, seed)
    columns = ("L_km", "kappa_S", "I_AB", "chi_E", "SKE", "SKR_bps", "plob")
    return [_emit(out_dir, "ske_curve", comment, meta, columns, rows, fmt)]


def cmd_reduce(cfg, out_dir, seed, workers, fmt):
    if not os.path.exists(cfg["profile"]):
        raise ValueError(f"profile file not found: {cfg['profile']}")
    with open(cfg["profile"], "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        pi = [complex(v[0], v[1]) for v in raw["phase_insensitive"]]
        ps = [complex(v[0], v[1]) for v in raw["phase_sensitive"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed profile: {exc}") from exc
    profile = reduction.CorrelationProfile(pi, ps)
    reduced, log = reduction.reduce_correlations(profile)
    comment, meta = _meta("reduce", cfg, seed)
    payload = {
        "reduced": {
            "phase_insensitive": [[v.real, v.imag] for v in reduced.phase_insensitive],
            "phase_sensitive": [[v.real, v.imag] for v in reduced.phase_sensitive],
        },
        "log": [
            {"op": "phase", "mode": op.mode, "angle": op.angle}
            if isinstance(op, reduction.PhaseOp)
            else {
                "op": "beam_splitter",
                "mode_a": op.mode_a,
                "mode_b": op.mode_b,
                "transmissivity": op.transmissivity,
            }
            for op in log
        ],
    }
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "reduce.json")
    _write_json(path, meta, payload)
    return [path]


def cmd_simulate(cfg, out_dir, seed, workers, fmt):
    src = SourceSpec(cfg["source_n_s"])
    params = AttackParameters(cfg["kappa_s"], cfg["kappa_f"], cfg["zeta"], cfg["delta"], cfg["xi"])
    tap = estimation.SpdcTap(cfg["tap_tau"]) if cfg["tap_tau"] < 1.0 else None
    records = estimation.simulate_attack_records(src, params, cfg["n_pairs"], seed=seed, tap=tap)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "records.jsonl")
    estimation.write_records_jsonl(records, path)
    return [path]


def cmd_estimate(cfg, out_dir, seed, workers, fmt):
    if not os.path.exists(cfg["records"]):
        raise ValueError(f"records file not found: {cfg['records']}")
    records = estimation.read_records_jsonl(cfg["records"])
    src = SourceSpec(cfg["source_n_s"])
    tap = estimation.SpdcTap(cfg["tap_tau"]) if cfg["tap_tau"] < 1.0 else None
    est = estimation.estimate_intrusion(records, src, tap=tap)
    comment, meta = _meta("estimate", cfg, seed)
    payload = {
        "kappa_s_bar": est.kappa_s_bar,
        "kappa_f_lower": est.kappa_f_lower,
        "k_f_lower": est.k_f_lower,
        "n_samples": est.n_samples,
        "std_errors": est.std_errors,
    }
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "estimate.json")
    _write_json(path, meta, payload)
    return [path]


def cmd_first_order(cfg, out_dir, seed, workers, fmt):
    src = SourceSpec(cfg["source_n_s"])
    channel = _channel_from(cfg)
    grid = (cfg["grid_zeta"], cfg["grid_delta"], cfg["grid_xi"])
    reports = []
    for ks in cfg["kappa_s_values"]:
        r = bounds.first_order_check(src, ks, channel, step=cfg["step"], grid_shape=grid)
        reports.append(
            {
                "kappa_s": r.kappa_s,
                "step": r.step,
                "argmin_zeta": r.argmin_zeta,
                "argmin_delta": r.argmin_delta,
                "argmin_xi": r.argmin_xi,
                "derivative_min": r.derivative_min,
                "zeroth_order_spread": r.zeroth_order_spread,
                "reduced_argmin_zeta": r.reduced_argmin_zeta,
                "reduced_argmin_delta": r.reduced_argmin_delta,
                "reduced_derivative_min": r.reduced_derivative_min,
            }
        )
    comment, meta = _meta("first-order", cfg, seed)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "first_order.json")
    _write_json(path, meta, reports)
    return [path]


COMMANDS = {
    "chi-e": cmd_chi_e,
    "convexity": cmd_convexity,
    "theorem2": cmd_theorem2,
    "ske-curve": cmd_ske_curve,
    "reduce": cmd_reduce,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "first-order": cmd_first_order,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="twqkd", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (simulate)")
    parser.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.command)
        paths = COMMANDS[args.command](cfg, args.out, args.seed, max(1, args.workers), args.format)
    except (ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": "validation", "message": str(exc)}) + "\n")
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(json.dumps({"error": "numerical", "message": str(exc)}) + "\n")
        return EXIT_NUMERICAL
    for p in paths:
        sys.stdout.write(p + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
