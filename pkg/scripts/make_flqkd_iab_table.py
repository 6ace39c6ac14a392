#!/usr/bin/env python3
"""Generate the shipped floodlight I_AB table.

The Shannon-information term for the floodlight protocol is an input to
this package, not a result of it.  This script produces the sample table in
src/twqkd/data/ from the stand-in link-budget error model in
twqkd.protocols (matched-reference binary-phase readout against the
amplified background), with the source brightness optimized at each length
for the target modes-per-symbol count.  Replace the output with a measured
or independently modeled table for serious use; downstream results are
conditional on it.

Usage: python3 scripts/make_flqkd_iab_table.py [out_csv]
"""

import sys
from pathlib import Path

import numpy as np

from twqkd.channels import EncodingSpec
from twqkd.gaussian import SourceSpec
from twqkd.protocols import (
    VARIANT_FLQKD,
    BscErrorModel,
    LinkModel,
    ProtocolConfig,
    flqkd_reference_error_prob,
    optimize_flqkd_brightness,
)

GAIN = 1e6
MODES_PER_SYMBOL = 200
LENGTHS_KM = np.arange(0.0, 100.01, 2.5)


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "src" / "twqkd" / "data" / "flqkd_iab_me200.csv"
    )
    model = BscErrorModel(
        lambda length, n_s: flqkd_reference_error_prob(length, n_s, GAIN, MODES_PER_SYMBOL)
    )
    cfg = ProtocolConfig(
        VARIANT_FLQKD,
        SourceSpec(0.01),
        EncodingSpec(0.0, MODES_PER_SYMBOL),
        gain=GAIN,
        i_ab_model=model,
    )
    rows, ns_notes = [], []
    for length in LENGTHS_KM:
        report, _ = optimize_flqkd_brightness(cfg, LinkModel(length))
        rows.append(f"{length:g},{report.i_ab:.12g}")
        ns_notes.append(f"{length:g}:{report.n_s:.5g}")
        print(f"L={length:6.1f} km  n_s*={report.n_s:.5g}  I_AB={report.i_ab:.6f}  SKE={report.ske:.6f}")
    lines = [
        "# Sample floodlight Shannon-information table (model-dependent input).",
        f"# Stand-in link-budget model, gain {GAIN:g}, {MODES_PER_SYMBOL} modes/symbol,",
        "# source brightness optimized per length; per-length optima n_s* were:",
        "# " + " ".join(ns_notes),
        "L_km,I_AB_bits_per_symbol",
    ] + rows
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
