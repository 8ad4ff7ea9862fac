"""Two-user MU-MIMO orchestration: NDP sounding, uncompressed CSI feedback,
zero-forcing weight computation, and precoded downlink transmission.

The feedback path is an ideal in-process message with a configurable
per-station delay and an optional Gaussian CSI-error knob standing in for
feedback imperfections.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from .errors import DegenerateChannel, NotAnNdp, SoundingFailed
from .framer import MuUser, PhyConfig, assemble_packet
from .params import FFT_SIZE, HT_CSD_NS, HT_MAP, PhyFormat, csd_samples
from .receiver import receive

_ACTIVE = np.array(HT_MAP.active_indices)


@dataclass(frozen=True)
class CsiReport:
    station_id: int
    h: np.ndarray  # (n_active, 2) rows [H1, H2] per subcarrier, CSD folded in
    sequence: int
    subcarriers: np.ndarray = field(default_factory=lambda: _ACTIVE.copy())


@dataclass(frozen=True)
class SteeringMatrix:
    q: np.ndarray  # (n_active, 2, 2); column i serves station i
    degenerate: np.ndarray | None = None  # mask of zeroed subcarriers
    subcarriers: np.ndarray = field(default_factory=lambda: _ACTIVE.copy())


@dataclass(frozen=True)
class Station:
    station_id: int
    feedback_delay_s: float = 0.0


@dataclass
class SoundingResult:
    steering: SteeringMatrix
    reports: tuple
    sequence: int
    feedback_times_s: tuple


def measure_ndp_channel(station_rx: np.ndarray, station_id: int = 0,
                        sequence: int = 0) -> CsiReport:
    """Run the station receiver over a sounding capture and report its CSI row."""
    packets = receive(station_rx, max_packets=1)
    if not packets:
        raise NotAnNdp("no packet detected in the sounding capture")
    pkt = packets[0]
    if pkt.format is not PhyFormat.VHT_NDP or pkt.diagnostics.csi is None:
        raise NotAnNdp(f"detected a {pkt.format.value} frame, not a sounding NDP")
    return CsiReport(station_id=station_id, h=pkt.diagnostics.csi, sequence=sequence)


def compute_zf_weights(csi_sta1: CsiReport, csi_sta2: CsiReport,
                       min_norm: float = 1e-12) -> SteeringMatrix:
    """Per-subcarrier beamforming columns, each orthogonal to the other user.

    Column 1 = [-H2, H1] of station 2 (unit norm), column 2 likewise from
    station 1. Subcarriers whose CSI row is numerically zero get a zeroed
    column and are flagged rather than rejected.
    """
    if not np.array_equal(csi_sta1.subcarriers, csi_sta2.subcarriers):
        raise DegenerateChannel("CSI reports cover different subcarrier sets")
    q = np.empty((len(csi_sta1.subcarriers), 2, 2), dtype=np.complex128)
    degenerate = np.zeros(len(csi_sta1.subcarriers), dtype=bool)
    for col, other in ((0, csi_sta2.h), (1, csi_sta1.h)):
        vec = np.stack([-other[:, 1], other[:, 0]], axis=1)
        norm = np.linalg.norm(vec, axis=1)
        bad = norm < min_norm
        degenerate |= bad
        norm = np.where(bad, 1.0, norm)
        q[:, :, col] = np.where(bad[:, None], 0.0, vec / norm[:, None])
    return SteeringMatrix(q=q, degenerate=degenerate)


def _station_capture(frame_samples: np.ndarray, taps: chan.MimoChannelTaps,
                     station: int, snr_db, rng, pad: int = 200) -> np.ndarray:
    """Propagate the AP frame to one station antenna and add noise."""
    rx = chan.apply_mimo_fir(frame_samples, taps)[station]
    padded = np.concatenate([np.zeros(pad, dtype=np.complex128), rx,
                             np.zeros(pad, dtype=np.complex128)])
    ref = float(np.mean(np.abs(rx) ** 2))
    if ref <= 0:
        return padded
    return chan.awgn(padded, snr_db, signal_power_ref=ref, rng=rng)


def run_sounding_session(ap_seed: int, sta1: Station, sta2: Station,
                         taps: chan.MimoChannelTaps, snr_db=None,
                         csi_error_std: float = 0.0,
                         rng: np.random.Generator | None = None) -> SoundingResult:
    """NDP broadcast, per-station measurement, staggered feedback, ZF weights.

    The channel realization is fixed for the whole session. Raises
    SoundingFailed when either station cannot detect or classify the NDP.
    """
    rng = rng or np.random.default_rng(ap_seed)
    ndp = assemble_packet(PhyConfig(format=PhyFormat.VHT_NDP))
    reports = []
    for station in (sta1, sta2):
        capture = _station_capture(ndp.samples, taps, station.station_id, snr_db, rng)
        try:
            rep = measure_ndp_channel(capture, station.station_id, sequence=ap_seed)
        except NotAnNdp as exc:
            raise SoundingFailed(f"station {station.station_id}: {exc}") from exc
        if csi_error_std > 0:
            err = csi_error_std * (rng.standard_normal(rep.h.shape)
                                   + 1j * rng.standard_normal(rep.h.shape)) / np.sqrt(2)
            rep = CsiReport(rep.station_id, rep.h + err, rep.sequence)
        reports.append(rep)
    feedback_times = (sta1.feedback_delay_s, sta2.feedback_delay_s)
    steering = compute_zf_weights(reports[0], reports[1])
    return SoundingResult(steering=steering, reports=tuple(reports),
                          sequence=ap_seed, feedback_times_s=feedback_times)


def leakage_db(taps: chan.MimoChannelTaps, steering: SteeringMatrix) -> np.ndarray:
    """Cross-user leakage power relative to signal, dB, one value per station.

    Uses the true channel response (with the per-antenna cyclic shift folded
    in, matching what stations measure), so it reflects how well the columns
    null the opposite user after CSI errors and feedback impairments.
    """
    k = np.asarray(steering.subcarriers, dtype=np.float64)
    h = chan.frequency_response(taps, steering.subcarriers)  # (k, n_sta, n_tx)
    for ant, shift_ns in enumerate(HT_CSD_NS):
        h[:, :, ant] *= np.exp(-2j * np.pi * k * csd_samples(shift_ns) / FFT_SIZE)[:, None]
    g = np.einsum("kst,ktc->ksc", h, steering.q)  # (k, station, column)
    out = np.empty(2)
    for i in range(2):
        sig = np.sum(np.abs(g[:, i, i]) ** 2)
        leak = np.sum(np.abs(g[:, i, 1 - i]) ** 2)
        out[i] = 10.0 * np.log10((leak + 1e-30) / (sig + 1e-30))
    return out


def run_mu_transmission(payload1: bytes, payload2: bytes, steering: SteeringMatrix,
                        taps: chan.MimoChannelTaps, snr_db,
                        mcs1: int = 0, mcs2: int | None = None,
                        rng: np.random.Generator | None = None):
    """Precoded two-user downlink; each station runs the standard receiver.

    Returns (packet_for_sta1, packet_for_sta2, leakage_db_per_station); a
    station that fails to decode yields None in its slot.
    """
    rng = rng or np.random.default_rng()
    mcs2 = mcs1 if mcs2 is None else mcs2
    cfg = PhyConfig(format=PhyFormat.VHT_MU,
                    mu_users=(MuUser(mcs1, payload1), MuUser(mcs2, payload2)))
    frame = assemble_packet(cfg, steering=steering.q)
    results = []
    for station in (0, 1):
        capture = _station_capture(frame.samples, taps, station, snr_db, rng)
        packets = receive(capture, max_packets=1)
        results.append(packets[0] if packets else None)
    return results[0], results[1], leakage_db(taps, steering)
