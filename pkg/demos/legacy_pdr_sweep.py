"""Desk-scale packet-delivery sweep: PDR against SNR for the legacy rates.

A reduced version of the acceptance study (fewer trials, coarser grid) that
finishes in about a minute and prints the PDR table plus each rate's 90%
delivery threshold. Full-resolution runs go through the command line:

    dot11phy sweep --format legacy --mcs 0 1 2 3 4 5 6 7 \
        --snr-start -2 --snr-stop 30 --snr-step 1 --trials 1000 --out legacy.csv
"""
import numpy as np

from dot11phy import PhyFormat, SweepSpec, pdr_sweep, rows_to_csv

spec = SweepSpec(
    format=PhyFormat.LEGACY,
    mcs_list=tuple(range(8)),
    snr_grid_db=tuple(float(s) for s in range(-2, 31, 2)),
    trials=60,
    payload_octets=500,
    channel="awgn",
    master_seed=42,
)
rows = pdr_sweep(spec, n_workers=2)
rows_to_csv(rows, "legacy_pdr.csv")

by_mcs = {}
for r in rows:
    by_mcs.setdefault(r.mcs, []).append((r.snr_db, r.pdr))

print("snr_db " + " ".join(f"mcs{m:<4d}" for m in range(8)))
for i, snr in enumerate(spec.snr_grid_db):
    cells = " ".join(f"{by_mcs[m][i][1]:7.2f}" for m in range(8))
    print(f"{snr:6.0f} {cells}")

print("\n90% delivery threshold (linear interpolation):")
for m in range(8):
    pts = by_mcs[m]
    snr90 = None
    for j, (snr, pdr) in enumerate(pts):
        if pdr >= 0.9:
            if j == 0:
                snr90 = snr
            else:
                s0, p0 = pts[j - 1]
                snr90 = s0 + (snr - s0) * (0.9 - p0) / (pdr - p0)
            break
    print(f"  mcs {m}: {snr90:.1f} dB" if snr90 is not None else f"  mcs {m}: not reached")
print("\nwrote legacy_pdr.csv")
