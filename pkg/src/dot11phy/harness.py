"""Reproducible experiment driver: PDR sweeps, IQ file import/export, and
file decoding.

Per-trial randomness is derived counter-style from (master seed, mcs, snr
index, trial index), so results are byte-identical across runs and across
worker counts.
"""
from __future__ import annotations

import csv
import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from . import sync
from .framer import PhyConfig, assemble_packet
from .errors import BadMagic, TruncatedFile, VersionMismatch
from .params import SAMPLE_RATE, PhyFormat, mcs_params
from .receiver import receive

IQ_MAGIC = b"IQF1"
IQ_VERSION = 1
_HEADER_FMT = "<4sIdIQI"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)

CSV_COLUMNS = ("format", "mcs", "snr_db", "trials", "pdr", "mean_cfo_err", "timing_err")

CHANNEL_KINDS = ("ideal", "awgn", "tgac_b")


@dataclass(frozen=True)
class SweepSpec:
    format: PhyFormat
    mcs_list: tuple
    snr_grid_db: tuple
    trials: int = 200
    payload_octets: int = 500
    cfo_hz: float = 0.0
    channel: str = "awgn"
    master_seed: int = 0
    trigger_threshold: float = sync.DETECT_THRESHOLD

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if list(self.snr_grid_db) != sorted(self.snr_grid_db):
            raise ValueError("snr grid must be sorted")
        if self.channel not in CHANNEL_KINDS:
            raise ValueError(f"channel must be one of {CHANNEL_KINDS}")
        for m in self.mcs_list:
            mcs_params(self.format, m)


@dataclass
class SweepRow:
    format: str
    mcs: int
    snr_db: float
    trials: int
    pdr: float
    mean_cfo_err: float
    timing_err: float


@dataclass
class TrialResult:
    ok: bool
    cfo_err: float = np.nan
    timing_err: float = np.nan


def _trial_rng(master_seed: int, mcs: int, snr_idx: int, trial: int) -> np.random.Generator:
    return np.random.default_rng((master_seed, mcs, snr_idx, trial))


def run_trial(fmt: PhyFormat, mcs: int, snr_db, payload_octets: int,
              cfo_hz: float, channel_kind: str,
              rng: np.random.Generator,
              trigger_threshold: float = sync.DETECT_THRESHOLD) -> TrialResult:
    """One packet through generation, impairment, and reception."""
    payload = rng.integers(0, 256, payload_octets, dtype=np.uint8).tobytes()
    cfg = PhyConfig(format=fmt, mcs=mcs, payload=payload)
    frame = assemble_packet(cfg)
    n_tx = frame.samples.shape[0]
    n_rx = 2 if fmt is PhyFormat.HT else 1

    if channel_kind == "tgac_b":
        taps = chan.tgac_model_b_taps(rng=rng, n_rx=n_rx, n_tx=n_tx)
    else:
        taps = chan.ideal_taps(n_rx, n_tx)
    rx = chan.apply_mimo_fir(frame.samples, taps)

    delay = int(rng.integers(120, 400))
    tail = 120
    padded = np.concatenate(
        [np.zeros((n_rx, delay)), rx, np.zeros((n_rx, tail))], axis=1)
    if cfo_hz:
        padded = chan.apply_cfo(padded, cfo_hz)
    if channel_kind != "ideal":
        ref = float(np.mean(np.abs(rx) ** 2))
        padded = chan.awgn(padded, snr_db, signal_power_ref=ref, rng=rng)

    packets = receive(padded, threshold=trigger_threshold, max_packets=1)
    expect_fmt = fmt
    for pkt in packets:
        if pkt.crc_ok and pkt.format is expect_fmt and pkt.payload == payload:
            true_eps = 2 * np.pi * cfo_hz / SAMPLE_RATE
            cfo_err = abs(pkt.diagnostics.cfo - true_eps)
            # LTF symbol 1 starts after the 160-sample L-STF and 32-sample GI2.
            timing_err = abs(pkt.diagnostics.ltf_start - (delay + 192))
            return TrialResult(True, cfo_err, timing_err)
    return TrialResult(False)


def _run_point(args) -> SweepRow:
    spec_dict, mcs, snr_idx = args
    spec = SweepSpec(**{**spec_dict, "format": PhyFormat(spec_dict["format"])})
    snr_db = spec.snr_grid_db[snr_idx]
    ok = 0
    cfo_errs = []
    timing_errs = []
    for trial in range(spec.trials):
        rng = _trial_rng(spec.master_seed, mcs, snr_idx, trial)
        res = run_trial(spec.format, mcs, snr_db, spec.payload_octets,
                        spec.cfo_hz, spec.channel, rng, spec.trigger_threshold)
        if res.ok:
            ok += 1
            cfo_errs.append(res.cfo_err)
            timing_errs.append(res.timing_err)
    return SweepRow(
        format=spec.format.value,
        mcs=mcs,
        snr_db=float(snr_db),
        trials=spec.trials,
        pdr=ok / spec.trials,
        mean_cfo_err=float(np.mean(cfo_errs)) if cfo_errs else float("nan"),
        timing_err=float(np.mean(timing_errs)) if timing_errs else float("nan"),
    )


def pdr_sweep(spec: SweepSpec, n_workers: int = 1) -> list:
    """Packet delivery ratio over the (mcs, snr) grid; rows sorted by key."""
    spec_dict = {
        "format": spec.format.value,
        "mcs_list": tuple(spec.mcs_list),
        "snr_grid_db": tuple(spec.snr_grid_db),
        "trials": spec.trials,
        "payload_octets": spec.payload_octets,
        "cfo_hz": spec.cfo_hz,
        "channel": spec.channel,
        "master_seed": spec.master_seed,
        "trigger_threshold": spec.trigger_threshold,
    }
    points = [(spec_dict, mcs, i)
              for mcs in spec.mcs_list
              for i in range(len(spec.snr_grid_db))]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_run_point, points, chunksize=1))
    else:
        rows = [_run_point(p) for p in points]
    rows.sort(key=lambda r: (r.mcs, r.snr_db))
    return rows


def rows_to_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.format, r.mcs, f"{r.snr_db:.3f}", r.trials,
                        f"{r.pdr:.6f}", f"{r.mean_cfo_err:.9f}", f"{r.timing_err:.3f}"])


# --- IQ file format -------------------------------------------------------------

@dataclass
class IqFileHeader:
    magic: bytes = IQ_MAGIC
    version: int = IQ_VERSION
    sample_rate: float = SAMPLE_RATE
    n_streams: int = 1
    n_samples: int = 0
    metadata: dict = field(default_factory=dict)


def write_iq(path, streams: np.ndarray, sample_rate: float = SAMPLE_RATE,
             metadata: dict | None = None) -> IqFileHeader:
    """Interleaved little-endian float32 (I, Q) pairs in stream-major blocks."""
    x = np.atleast_2d(np.asarray(streams, dtype=np.complex64))
    header = IqFileHeader(sample_rate=sample_rate, n_streams=x.shape[0],
                          n_samples=x.shape[1], metadata=metadata or {})
    meta = json.dumps(header.metadata, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack(_HEADER_FMT, IQ_MAGIC, IQ_VERSION, sample_rate,
                             x.shape[0], x.shape[1], len(meta)))
        fh.write(meta)
        flat = np.empty(2 * x.shape[1], dtype="<f4")
        for s in range(x.shape[0]):
            flat[0::2] = x[s].real
            flat[1::2] = x[s].imag
            fh.write(flat.tobytes())
    return header


def read_iq(path):
    """Returns (streams, header); raises BadMagic / VersionMismatch / TruncatedFile."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER_SIZE)
        if len(raw) < _HEADER_SIZE:
            raise TruncatedFile("file shorter than the fixed header")
        magic, version, fs, n_streams, n_samples, meta_len = struct.unpack(_HEADER_FMT, raw)
        if magic != IQ_MAGIC:
            raise BadMagic(f"unexpected magic {magic!r}")
        if version != IQ_VERSION:
            raise VersionMismatch(f"file version {version}, supported {IQ_VERSION}")
        meta_raw = fh.read(meta_len)
        if len(meta_raw) < meta_len:
            raise TruncatedFile("metadata block truncated")
        payload = fh.read(8 * n_streams * n_samples)
        if len(payload) < 8 * n_streams * n_samples:
            raise TruncatedFile("sample payload truncated")
    header = IqFileHeader(sample_rate=fs, n_streams=n_streams, n_samples=n_samples,
                          metadata=json.loads(meta_raw) if meta_len else {})
    flat = np.frombuffer(payload, dtype="<f4").reshape(n_streams, 2 * n_samples)
    streams = (flat[:, 0::2] + 1j * flat[:, 1::2]).astype(np.complex64)
    return streams, header


def decode_file(path, threshold: float = sync.DETECT_THRESHOLD) -> list:
    """Decode every packet in an IQ file into JSON-ready summaries."""
    streams, header = read_iq(path)
    packets = receive(streams.astype(np.complex128), threshold=threshold)
    out = []
    for pkt in packets:
        entry = {
            "format": pkt.format.value,
            "mcs": pkt.mcs,
            "crc_ok": bool(pkt.crc_ok),
            "signaled_length": pkt.signaled_length,
            "payload_hex": pkt.payload.hex(),
            "cfo_rad_per_sample": pkt.diagnostics.cfo,
            "ltf_start": pkt.diagnostics.ltf_start,
        }
        if pkt.diagnostics.csi is not None:
            csi = pkt.diagnostics.csi
            entry["csi"] = [[[float(v.real), float(v.imag)] for v in row] for row in csi]
        out.append(entry)
    return out
