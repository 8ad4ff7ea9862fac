"""Why the receiver triggers on autocorrelation rather than cross-correlation.

Emits the four correlation traces of a clean frame for one and two transmit
antennas. With cyclic shift diversity the cross-correlation splits into twice
as many, smaller peaks, while the autocorrelation plateau survives intact;
its center also marks the GI2 midpoint used for fine timing.

Writes traces to CSV files next to this script for external plotting.
"""
from pathlib import Path

import numpy as np

from dot11phy import PhyConfig, PhyFormat, assemble_packet
from dot11phy.diagnostics import TRACE_MODES, correlation_trace, trace_to_csv

out_dir = Path(__file__).resolve().parent
for n_tx in (1, 2):
    frame = assemble_packet(PhyConfig(format=PhyFormat.LEGACY, mcs=0,
                                      payload=bytes(200), n_tx=n_tx))
    print(f"--- {n_tx} transmit antenna(s) ---")
    for mode in TRACE_MODES:
        trace = correlation_trace(frame, mode)
        path = out_dir / f"trace_{mode}_{n_tx}tx.csv"
        trace_to_csv(trace, path)
        head = trace.values[:320]
        n_high = int(np.sum(head > 0.9))
        print(f"{mode}: max {np.max(head):.3f}, samples above 0.9 in the "
              f"preamble: {n_high}  -> {path.name}")
    ac = correlation_trace(frame, "ac_ltf").values
    window = ac[100:250]
    plateau = 100 + np.flatnonzero(window > np.max(window) - 1e-9)
    print(f"lag-64 plateau spans [{plateau[0]}, {plateau[-1]}], "
          f"center {(plateau[0] + plateau[-1]) / 2:.1f} (GI2 midpoint is 176)\n")
