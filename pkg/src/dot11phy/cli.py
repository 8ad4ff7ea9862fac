"""Command-line front end: PDR sweeps, frame generation, file decoding,
MU-MIMO sessions, and correlation traces.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import channel as chan
from . import harness, sync
from .diagnostics import TRACE_MODES, correlation_trace, trace_to_csv
from .framer import MuUser, PhyConfig, assemble_packet
from .mumimo import Station, run_mu_transmission, run_sounding_session
from .params import PhyFormat

_SWEEP_FORMATS = {"legacy": PhyFormat.LEGACY, "ht": PhyFormat.HT, "vht": PhyFormat.VHT_SU}


def _config_from_json(data: dict) -> PhyConfig:
    fmt = PhyFormat(data["format"])
    payload = bytes.fromhex(data.get("payload_hex", ""))
    if "payload_random_bytes" in data:
        rng = np.random.default_rng(data.get("payload_seed", 0))
        payload = rng.integers(0, 256, data["payload_random_bytes"], dtype=np.uint8).tobytes()
    users = tuple(MuUser(u["mcs"], bytes.fromhex(u["payload_hex"]))
                  for u in data.get("mu_users", []))
    return PhyConfig(format=fmt, mcs=data.get("mcs", 0), payload=payload,
                     n_tx=data.get("n_tx", 0), mu_users=users)


def _cmd_sweep(args) -> int:
    snr_grid = tuple(np.arange(args.snr_start, args.snr_stop + args.snr_step / 2,
                               args.snr_step).tolist())
    spec = harness.SweepSpec(
        format=_SWEEP_FORMATS[args.format],
        mcs_list=tuple(args.mcs),
        snr_grid_db=snr_grid,
        trials=args.trials,
        payload_octets=args.payload_bytes,
        cfo_hz=args.cfo_hz,
        channel=args.channel.replace("-", "_"),
        master_seed=args.seed,
        trigger_threshold=args.trigger_threshold,
    )
    rows = harness.pdr_sweep(spec, n_workers=args.workers)
    harness.rows_to_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_tx(args) -> int:
    with open(args.config) as fh:
        cfg = _config_from_json(json.load(fh))
    if cfg.format is PhyFormat.VHT_MU:
        print("MU frames need a sounding session; use mu-session", file=sys.stderr)
        return 2
    frame = assemble_packet(cfg)
    pad = np.zeros((frame.samples.shape[0], args.pad), dtype=complex)
    samples = np.concatenate([pad, frame.samples, pad], axis=1)
    harness.write_iq(args.out, samples,
                     metadata={"format": cfg.format.value, "mcs": cfg.mcs,
                               "payload_octets": len(cfg.payload), "pad": args.pad})
    print(f"wrote {samples.shape[1]} samples x {samples.shape[0]} streams to {args.out}")
    return 0


def _cmd_rx(args) -> int:
    reports = harness.decode_file(args.file, threshold=args.trigger_threshold)
    if args.json:
        for rep in reports:
            print(json.dumps(rep))
    else:
        for rep in reports:
            print(f"{rep['format']} mcs={rep['mcs']} len={rep['signaled_length']} "
                  f"crc_ok={rep['crc_ok']} cfo={rep['cfo_rad_per_sample']:.6f}")
        print(f"{len(reports)} packet(s) decoded")
    return 0


def _cmd_mu_session(args) -> int:
    rng = np.random.default_rng(args.seed)
    taps = chan.tgac_model_b_taps(rng=rng) if args.channel == "tgac-b" else _random_flat(rng)
    sounding = run_sounding_session(args.seed, Station(0), Station(1, 1e-3), taps,
                                    snr_db=None, rng=rng)
    payloads = [rng.integers(0, 256, args.payload_bytes, dtype=np.uint8).tobytes()
                for _ in range(2)]
    pkt1, pkt2, leak = run_mu_transmission(payloads[0], payloads[1], sounding.steering,
                                           taps, args.snr, mcs1=args.mcs, rng=rng)
    result = {
        "seed": args.seed,
        "snr_db": args.snr,
        "mcs": args.mcs,
        "leakage_db": [float(v) for v in leak],
        "sta1_ok": bool(pkt1 and pkt1.crc_ok and pkt1.payload == payloads[0]),
        "sta2_ok": bool(pkt2 and pkt2.crc_ok and pkt2.payload == payloads[1]),
    }
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _random_flat(rng) -> chan.MimoChannelTaps:
    h = (rng.standard_normal((2, 2, 1)) + 1j * rng.standard_normal((2, 2, 1))) / np.sqrt(2)
    return chan.MimoChannelTaps(taps=h)


def _cmd_trace(args) -> int:
    with open(args.config) as fh:
        cfg = _config_from_json(json.load(fh))
    frame = assemble_packet(cfg)
    trace = correlation_trace(frame, args.mode)
    trace_to_csv(trace, args.out)
    print(f"wrote {len(trace.values)} points to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dot11phy",
                                description="802.11a/g/n/ac 20 MHz baseband simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="PDR-vs-SNR Monte Carlo sweep")
    sw.add_argument("--format", choices=sorted(_SWEEP_FORMATS), required=True)
    sw.add_argument("--mcs", type=int, nargs="+", required=True)
    sw.add_argument("--snr-start", type=float, required=True)
    sw.add_argument("--snr-stop", type=float, required=True)
    sw.add_argument("--snr-step", type=float, default=1.0)
    sw.add_argument("--trials", type=int, default=1000)
    sw.add_argument("--payload-bytes", type=int, default=500)
    sw.add_argument("--cfo-hz", type=float, default=0.0)
    sw.add_argument("--channel", choices=["ideal", "awgn", "tgac-b"], default="awgn")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--trigger-threshold", type=float, default=sync.DETECT_THRESHOLD)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=_cmd_sweep)

    tx = sub.add_parser("tx", help="generate a frame into an IQ file")
    tx.add_argument("--config", required=True, help="JSON PhyConfig description")
    tx.add_argument("--pad", type=int, default=300, help="zero samples around the frame")
    tx.add_argument("--out", required=True)
    tx.set_defaults(func=_cmd_tx)

    rx = sub.add_parser("rx", help="decode packets from an IQ file")
    rx.add_argument("file")
    rx.add_argument("--json", action="store_true", help="one JSON object per packet")
    rx.add_argument("--trigger-threshold", type=float, default=sync.DETECT_THRESHOLD)
    rx.set_defaults(func=_cmd_rx)

    mu = sub.add_parser("mu-session", help="sounding + precoded two-user transmission")
    mu.add_argument("--seed", type=int, default=0)
    mu.add_argument("--mcs", type=int, default=0)
    mu.add_argument("--snr", type=float, default=30.0)
    mu.add_argument("--payload-bytes", type=int, default=100)
    mu.add_argument("--channel", choices=["flat", "tgac-b"], default="flat")
    mu.add_argument("--out", default=None)
    mu.set_defaults(func=_cmd_mu_session)

    tr = sub.add_parser("trace", help="correlation trace of a clean frame")
    tr.add_argument("--mode", choices=TRACE_MODES, required=True)
    tr.add_argument("--config", required=True)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=_cmd_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
