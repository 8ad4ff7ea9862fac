"""Post-synchronization receiver: signal decode, format classification,
channel estimation, pilot tracking, SISO equalization, 2x2 ZF detection,
and payload decoding for every supported packet format.

The streaming entry point is receive(); per-packet failures raise PacketDrop
subclasses internally, which drop the packet and re-arm the detector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from fractions import Fraction

import numpy as np

from . import coding, params, sync
from .errors import OutOfBounds, PacketDrop, ParityFail, SingularChannel
from .framer import HTLTF_SEQUENCE, LTF_SEQUENCE, P_MATRIX
from .modulation import demap_llr, map_symbols
from .params import (
    FFT_SIZE,
    GI_SAMPLES,
    HT_MAP,
    LEGACY_MAP,
    LSIG_RATE_BITS,
    SYMBOL_SAMPLES,
    Modulation,
    PhyFormat,
    mcs_params,
    symbols_for_payload,
)

# FFT windows start six samples inside the guard interval, absorbing the
# few-sample timing spread of shoulder timing over asymmetric channels; the
# common phase ramp this adds folds into every channel estimate and cancels.
FFT_BACKOFF = 6
COND_LIMIT = 1e8
NOISE_FLOOR = 1e-12
MAX_RX_SYMBOLS = 1500

_LEG_ACT = np.array(LEGACY_MAP.active_indices)
_HT_ACT = np.array(HT_MAP.active_indices)
_LEG_DATA_POS = np.array([LEGACY_MAP.active_indices.index(k) for k in LEGACY_MAP.data_indices])
_LEG_PILOT_POS = np.array([LEGACY_MAP.active_indices.index(k) for k in LEGACY_MAP.pilot_indices])
_HT_DATA_POS = np.array([HT_MAP.active_indices.index(k) for k in HT_MAP.data_indices])
_HT_PILOT_POS = np.array([HT_MAP.active_indices.index(k) for k in HT_MAP.pilot_indices])
_LEG_LTF = np.array([LTF_SEQUENCE[k] for k in LEGACY_MAP.active_indices], dtype=np.complex128)
_HT_LTF = np.array([HTLTF_SEQUENCE[k] for k in HT_MAP.active_indices], dtype=np.complex128)
_P_INV = np.linalg.inv(P_MATRIX)


class ChannelKind(Enum):
    LEGACY_EQUIVALENT = "legacy_equivalent"
    HT_MIMO = "ht_mimo"
    VHT_EQUIVALENT = "vht_equivalent"


@dataclass
class ChannelEstimate:
    kind: ChannelKind
    h: np.ndarray  # (n_active,) for equivalent kinds, (n_active, n_rx, n_ss) for MIMO
    subcarriers: np.ndarray


@dataclass
class RxDiagnostics:
    cfo: float = 0.0
    ltf_start: int = -1
    evm: dict = dc_field(default_factory=dict)
    channel: ChannelEstimate | None = None
    csi: np.ndarray | None = None
    noise_var: float = 0.0
    sigb_crc_ok: bool | None = None
    ht_stf_power: float | None = None


@dataclass
class ReceivedPacket:
    format: PhyFormat
    mcs: int
    payload: bytes
    crc_ok: bool
    signaled_length: int
    diagnostics: RxDiagnostics


# --- demodulation primitives --------------------------------------------------

def _fft_windows(stream: np.ndarray, starts: np.ndarray, bins: np.ndarray,
                 n_active_norm: int) -> np.ndarray:
    """FFT the 64-sample windows at the given start indices; (n_win, n_active)."""
    starts = np.asarray(starts)
    if np.any(starts < 0) or np.any(starts + FFT_SIZE > len(stream)):
        raise OutOfBounds("FFT window extends past the stream")
    idx = starts[:, None] + np.arange(FFT_SIZE)[None, :]
    spec = np.fft.fft(stream[idx], axis=1) * (math.sqrt(n_active_norm) / FFT_SIZE)
    return spec[:, bins % FFT_SIZE]


def estimate_noise(ltf1_fft: np.ndarray, ltf2_fft: np.ndarray) -> float:
    """Per-subcarrier noise variance from the repeated long training symbols."""
    var = float(np.mean(np.abs(ltf1_fft - ltf2_fft) ** 2) / 2.0)
    return max(var, NOISE_FLOOR)


# --- channel estimation and tracking ------------------------------------------

def estimate_legacy_channel(ltf1_fft: np.ndarray, ltf2_fft: np.ndarray) -> ChannelEstimate:
    """Two-symbol averaged least-squares estimate of the equivalent channel."""
    h = (ltf1_fft + ltf2_fft) / (2.0 * _LEG_LTF)
    return ChannelEstimate(ChannelKind.LEGACY_EQUIVALENT, h, _LEG_ACT.copy())


def _safe_equalize(y: np.ndarray, h: np.ndarray) -> np.ndarray:
    """y * conj(h) / |h|^2 with a floor; identical to y / h away from nulls and
    a graceful erasure (tiny output, no NaN) on dead subcarriers."""
    return y * np.conj(h) / np.maximum(np.abs(h) ** 2, NOISE_FLOOR)


def estimate_ht_mimo_channel(ltf_ffts: np.ndarray) -> ChannelEstimate:
    """Per-subcarrier MIMO estimate from the P-mapped long training symbols.

    ltf_ffts is (2 symbols, n_active, n_rx); the estimate is Z P^-1 / S with
    Z the (rx, symbol) matrix on each subcarrier. Stream-2 cyclic shift stays
    folded into the second column.
    """
    z = ltf_ffts.transpose(1, 2, 0)  # (k, rx, sym)
    h = np.einsum("krm,mj->krj", z, _P_INV.astype(np.complex128)) / _HT_LTF[:, None, None]
    return ChannelEstimate(ChannelKind.HT_MIMO, h, _HT_ACT.copy())


def pilot_phase_track(sym_fft: np.ndarray, pilot_refs: np.ndarray,
                      estimate: ChannelEstimate) -> np.ndarray:
    """Remove the common phase error measured on the pilot tones.

    Accepts one symbol (n_active,) or a batch (n_sym, n_active); with a MIMO
    estimate the trailing axis is the receive antenna and pilot_refs carries
    per-stream values.
    """
    pilot_pos = (_LEG_PILOT_POS if estimate.kind is ChannelKind.LEGACY_EQUIVALENT
                 else _HT_PILOT_POS)
    if estimate.h.ndim == 1:
        batched = sym_fft.ndim == 2
        y = np.atleast_2d(sym_fft)
        refs = pilot_refs.reshape(y.shape[0], -1)
        out = _pilot_correct_siso(y, refs, estimate.h, pilot_pos)
        return out if batched else out[0]
    batched = sym_fft.ndim == 3
    y = sym_fft if batched else sym_fft[None, ...]
    refs = pilot_refs if pilot_refs.ndim == 3 else pilot_refs[None, ...]
    out = _pilot_correct_mimo(y, refs, estimate.h, pilot_pos)
    return out if batched else out[0]


def _pilot_correct_siso(y: np.ndarray, refs: np.ndarray, h: np.ndarray,
                        pilot_pos: np.ndarray) -> np.ndarray:
    expected = h[pilot_pos][None, :] * refs
    corr = np.sum(y[:, pilot_pos] * np.conj(expected), axis=1)
    phase = np.angle(np.where(np.abs(corr) > 0, corr, 1.0))
    return y * np.exp(-1j * phase)[:, None]


def _pilot_correct_mimo(y: np.ndarray, refs: np.ndarray, h: np.ndarray,
                        pilot_pos: np.ndarray) -> np.ndarray:
    expected = np.einsum("mri,nmi->nmr", h[pilot_pos], refs)
    corr = np.sum(y[:, pilot_pos, :] * np.conj(expected), axis=(1, 2))
    phase = np.angle(np.where(np.abs(corr) > 0, corr, 1.0))
    return y * np.exp(-1j * phase)[:, None, None]


# --- signal fields -------------------------------------------------------------

def decode_lsig(sym_fft: np.ndarray, estimate: ChannelEstimate, noise_var: float):
    """Equalize, demap, and decode the legacy signal field.

    Returns (legacy_mcs, length_octets). Raises ParityFail on a bad parity
    bit or an undefined rate pattern.
    """
    eq = _safe_equalize(sym_fft, estimate.h)
    nv = noise_var / np.maximum(np.abs(estimate.h) ** 2, NOISE_FLOOR)
    llrs = demap_llr(eq[_LEG_DATA_POS], Modulation.BPSK, nv[_LEG_DATA_POS])
    llrs = coding.deinterleave_llr(llrs, 48, 1)
    bits = coding.viterbi_decode_soft(llrs, Fraction(1, 2), 18)
    if int(np.sum(bits)) % 2 != 0:  # even parity over rate, reserved, length, parity
        raise ParityFail("L-SIG parity check failed")
    rate_bits = tuple(int(b) for b in bits[:4])
    try:
        legacy_mcs = LSIG_RATE_BITS.index(rate_bits)
    except ValueError:
        raise ParityFail("L-SIG rate pattern undefined") from None
    length = int(np.dot(bits[5:17].astype(np.int64), 1 << np.arange(12)))
    return legacy_mcs, length


def classify_format(sym1_eq: np.ndarray, sym2_eq: np.ndarray) -> PhyFormat:
    """BPSK/QBPSK hypothesis test on the two symbols following L-SIG.

    (QBPSK, QBPSK) -> HT; (BPSK, QBPSK) -> VHT; anything else -> Legacy.
    Confirmation through the corresponding SIG CRC8 is the caller's job; on
    CRC8 failure the packet falls back to Legacy.
    """
    d1 = sym1_eq[_LEG_DATA_POS]
    d2 = sym2_eq[_LEG_DATA_POS]
    q1 = np.sum(d1.imag ** 2) > np.sum(d1.real ** 2)
    q2 = np.sum(d2.imag ** 2) > np.sum(d2.real ** 2)
    if q1 and q2:
        return PhyFormat.HT
    if not q1 and q2:
        return PhyFormat.VHT_SU
    return PhyFormat.LEGACY


def _decode_sig_pair(eq1: np.ndarray, eq2: np.ndarray, nv: np.ndarray,
                     axes: tuple) -> np.ndarray | None:
    """Joint rate-1/2 decode of two 24-bit signal symbols (HT-SIG or VHT-SIG-A).

    axes picks the constellation rail per symbol ('re' or 'im'). Returns the
    42 information bits, or None when the embedded CRC8 fails.
    """
    llr_parts = []
    for eq, axis in zip((eq1, eq2), axes):
        d = eq[_LEG_DATA_POS]
        rail = d.real if axis == "re" else d.imag
        llrs = 4.0 * rail / nv[_LEG_DATA_POS]
        llr_parts.append(coding.deinterleave_llr(llrs, 48, 1))
    bits = coding.viterbi_decode_soft(np.concatenate(llr_parts), Fraction(1, 2), 42)
    payload_bits = bits[:34]
    crc = bits[34:42]
    if not np.array_equal(coding.crc8(payload_bits), crc):
        return None
    return bits


def parse_ht_sig(bits: np.ndarray):
    mcs = int(np.dot(bits[:7].astype(np.int64), 1 << np.arange(7)))
    length = int(np.dot(bits[8:24].astype(np.int64), 1 << np.arange(16)))
    return mcs, length


def parse_vht_siga(bits: np.ndarray):
    group_id = int(np.dot(bits[4:10].astype(np.int64), 1 << np.arange(6)))
    nsts_u0 = int(np.dot(bits[10:13].astype(np.int64), 1 << np.arange(3)))
    su_mcs = int(np.dot(bits[28:32].astype(np.int64), 1 << np.arange(4)))
    mu = group_id != 0
    return mu, nsts_u0, su_mcs


def parse_vht_sigb(bits: np.ndarray, mu: bool):
    if mu:
        length = int(np.dot(bits[:16].astype(np.int64), 1 << np.arange(16)))
        mcs = int(np.dot(bits[16:20].astype(np.int64), 1 << np.arange(4)))
    else:
        length = int(np.dot(bits[:17].astype(np.int64), 1 << np.arange(17)))
        mcs = None
    return length, mcs


# --- MIMO detection -------------------------------------------------------------

def detect_zf(y: np.ndarray, h: np.ndarray):
    """Zero-forcing detection for one subcarrier.

    Returns (s_hat, per-stream noise amplification diag((H^H H)^-1)). Raises
    SingularChannel when the condition number exceeds COND_LIMIT.
    """
    h = np.asarray(h, dtype=np.complex128)
    svals = np.linalg.svd(h, compute_uv=False)
    if svals[-1] <= 0 or svals[0] / svals[-1] > COND_LIMIT:
        raise SingularChannel("channel matrix is not invertible")
    g = np.linalg.inv(h.conj().T @ h)
    return g @ h.conj().T @ np.asarray(y), np.real(np.diag(g))


def _zf_all(y: np.ndarray, h: np.ndarray, noise_var: float):
    """Vectorized ZF over (n_sym, n_k, n_rx); ill-conditioned subcarriers are
    erased (zero estimate, infinite noise) rather than aborting the packet."""
    hh = np.einsum("kri,krj->kij", h.conj(), h)  # (k, 2, 2), Hermitian
    a = hh[:, 0, 0].real
    d = hh[:, 1, 1].real
    b = hh[:, 0, 1]
    det = a * d - np.abs(b) ** 2
    tr = a + d
    disc = np.sqrt(np.maximum(tr ** 2 - 4 * det, 0.0))
    lam_min = (tr - disc) / 2
    lam_max = (tr + disc) / 2
    ok = lam_min > lam_max / (COND_LIMIT ** 2)
    det_safe = np.where(det > 0, det, 1.0)
    ginv = np.empty_like(hh)
    ginv[:, 0, 0] = d / det_safe
    ginv[:, 1, 1] = a / det_safe
    ginv[:, 0, 1] = -b / det_safe
    ginv[:, 1, 0] = -b.conj() / det_safe
    w = np.einsum("kij,krj->kir", ginv, h.conj())  # (k, n_ss, n_rx)
    s = np.einsum("kir,nkr->nki", w, y)
    nv = noise_var * np.stack([ginv[:, 0, 0].real, ginv[:, 1, 1].real], axis=1)
    s[:, ~ok, :] = 0.0
    nv[~ok, :] = np.inf
    return s, nv


# --- pilot reference tables -----------------------------------------------------

_legacy_pilot_refs = params.legacy_pilot_matrix
_ht_pilot_refs = params.ht_pilot_matrix
_vht_pilot_refs = params.vht_pilot_matrix


# --- payload helpers -------------------------------------------------------------

def _evm(points: np.ndarray, modulation: Modulation) -> float:
    pts = points.reshape(-1)[:256]
    bits = (demap_llr(pts, modulation, 1.0) > 0).astype(np.uint8)
    ideal = map_symbols(bits, modulation)
    return float(np.sqrt(np.mean(np.abs(pts - ideal) ** 2)))


def _decode_bits_to_psdu(bits: np.ndarray, length_octets: int):
    """Descramble with the seed carried in the service field, split out the
    PSDU and check its frame CRC. Returns (service_bits, psdu, crc_ok)."""
    seed = coding.seed_from_scrambled_service(bits[:7])
    if seed == 0:
        raise PacketDrop("descrambler seed collapsed to zero")
    descrambled = coding.scramble(bits[:16 + 8 * length_octets], seed)
    service = descrambled[:16]
    psdu = coding.bytes_from_bits(descrambled[16:])
    return service, psdu, coding.check_crc32(psdu)


def _siso_payload_llrs(y: np.ndarray, h: np.ndarray, noise_var: float,
                       mparams, data_pos: np.ndarray):
    """Equalize (Y/H), demap, and deinterleave a single-stream data block."""
    eq = _safe_equalize(y[:, data_pos], h[data_pos][None, :])
    nv = noise_var / np.maximum(np.abs(h[data_pos]) ** 2, NOISE_FLOOR)
    llrs = demap_llr(eq, mparams.modulation, nv)
    return coding.deinterleave_llr(llrs, mparams.n_cbpss, mparams.n_bpsc), eq


def _deparse_streams(per_stream_llrs: list, mparams) -> np.ndarray:
    if mparams.n_ss == 1:
        return per_stream_llrs[0]
    s = max(mparams.n_bpsc // 2, 1)
    stacked = np.stack([l.reshape(-1, s) for l in per_stream_llrs], axis=1)
    return stacked.reshape(-1)


# --- full receive pipeline --------------------------------------------------------

@dataclass
class _PacketContext:
    streams: np.ndarray
    eps: float
    n2: int

    def symbols(self, antenna: int, start: int, n_sym: int, bins, norm) -> np.ndarray:
        comp_start = start + GI_SAMPLES - FFT_BACKOFF
        length = (n_sym - 1) * SYMBOL_SAMPLES + FFT_SIZE
        if comp_start < 0 or comp_start + length > self.streams.shape[1]:
            raise OutOfBounds("packet extends past the stream")
        seg = sync.compensate_cfo(self.streams[antenna, comp_start:comp_start + length],
                                  self.eps, start_index=comp_start)
        starts = SYMBOL_SAMPLES * np.arange(n_sym)
        return _fft_windows(seg, starts, bins, norm)

    def raw_windows(self, antenna: int, starts: np.ndarray, bins, norm) -> np.ndarray:
        lo = int(np.min(starts)) - FFT_BACKOFF
        hi = int(np.max(starts)) - FFT_BACKOFF + FFT_SIZE
        if lo < 0 or hi > self.streams.shape[1]:
            raise OutOfBounds("window extends past the stream")
        seg = sync.compensate_cfo(self.streams[antenna, lo:hi], self.eps, start_index=lo)
        return _fft_windows(seg, np.asarray(starts) - FFT_BACKOFF - lo, bins, norm)


def receive(streams, threshold: float = sync.DETECT_THRESHOLD,
            min_plateau: int = sync.MIN_PLATEAU,
            max_packets: int | None = None) -> list:
    """Run the full state machine over one or two receive streams.

    Returns one ReceivedPacket per successfully decoded frame; detection
    re-arms after every packet or failed attempt.
    """
    x = np.atleast_2d(np.asarray(streams, dtype=np.complex128))
    rho = sync.autocorr_stream(x[0]).rho
    packets = []
    pos = 0
    while max_packets is None or len(packets) < max_packets:
        trig = sync.detect_trigger(rho, threshold, min_plateau, start=pos)
        if trig is None:
            break
        try:
            pkt, end = _process_packet(x, trig)
            packets.append(pkt)
            pos = max(end, trig + 1)
        except PacketDrop:
            pos = trig + GI_SAMPLES
    return packets


def _process_packet(x: np.ndarray, trig: int):
    s = sync.synchronize(x[0], trig)
    n2 = s.ltf_start
    ctx = _PacketContext(streams=x, eps=s.overall_cfo, n2=n2)

    ltf = ctx.raw_windows(0, np.array([n2, n2 + 64]), _LEG_ACT, LEGACY_MAP.n_active)
    noise_var = estimate_noise(ltf[0], ltf[1])
    est = estimate_legacy_channel(ltf[0], ltf[1])

    lsig_y = ctx.symbols(0, n2 + 128, 1, _LEG_ACT, LEGACY_MAP.n_active)
    lsig_y = pilot_phase_track(lsig_y, _legacy_pilot_refs(0, 1), est)
    rate_mcs, length = decode_lsig(lsig_y[0], est, noise_var)
    lsig_params = mcs_params(PhyFormat.LEGACY, rate_mcs)
    n_post = symbols_for_payload(lsig_params, length)
    if n_post > MAX_RX_SYMBOLS:
        raise PacketDrop("signaled duration implausibly long")
    packet_end = n2 + 128 + 80 + 80 * n_post

    diags = RxDiagnostics(cfo=s.overall_cfo, ltf_start=n2, channel=est,
                          noise_var=noise_var)
    diags.evm["l_sig"] = _evm(_safe_equalize(lsig_y[0][_LEG_DATA_POS], est.h[_LEG_DATA_POS]),
                              Modulation.BPSK)

    fmt = PhyFormat.LEGACY
    sig_bits = None
    if rate_mcs == 0 and n_post >= 2:
        two = ctx.symbols(0, n2 + 208, 2, _LEG_ACT, LEGACY_MAP.n_active)
        two = pilot_phase_track(two, _legacy_pilot_refs(1, 2), est)
        eq1 = _safe_equalize(two[0], est.h)
        eq2 = _safe_equalize(two[1], est.h)
        nv = noise_var / np.maximum(np.abs(est.h) ** 2, NOISE_FLOOR)
        candidate = classify_format(eq1, eq2)
        if candidate is PhyFormat.HT:
            sig_bits = _decode_sig_pair(eq1, eq2, nv, ("im", "im"))
            fmt = PhyFormat.HT if sig_bits is not None else PhyFormat.LEGACY
        elif candidate is PhyFormat.VHT_SU:
            sig_bits = _decode_sig_pair(eq1, eq2, nv, ("re", "im"))
            fmt = PhyFormat.VHT_SU if sig_bits is not None else PhyFormat.LEGACY

    if fmt is PhyFormat.LEGACY:
        pkt = _receive_legacy(ctx, est, noise_var, rate_mcs, length, n_post, diags)
    elif fmt is PhyFormat.HT:
        pkt = _receive_ht(ctx, sig_bits, noise_var, n_post, diags)
    else:
        pkt = _receive_vht(ctx, sig_bits, noise_var, n_post, diags)
    return pkt, packet_end


def _receive_legacy(ctx, est, noise_var, mcs, length, n_sym, diags) -> ReceivedPacket:
    p = mcs_params(PhyFormat.LEGACY, mcs)
    if length < 4:
        raise PacketDrop("legacy length too short for a frame check")
    y = ctx.symbols(0, ctx.n2 + 208, n_sym, _LEG_ACT, LEGACY_MAP.n_active)
    y = pilot_phase_track(y, _legacy_pilot_refs(1, n_sym), est)
    llrs, eq = _siso_payload_llrs(y, est.h, noise_var, p, _LEG_DATA_POS)
    n_info = n_sym * p.bits_per_symbol - coding.N_TAIL
    bits = coding.viterbi_decode_soft(llrs, p.code_rate, n_info)
    service, psdu, crc_ok = _decode_bits_to_psdu(bits, length)
    diags.evm["data"] = _evm(eq, p.modulation)
    return ReceivedPacket(PhyFormat.LEGACY, mcs, psdu[:-4], crc_ok, length, diags)


def _receive_ht(ctx, sig_bits, noise_var, n_post, diags) -> ReceivedPacket:
    mcs, length = parse_ht_sig(sig_bits)
    if not 8 <= mcs <= 15 or length < 4:
        raise PacketDrop("HT-SIG fields out of range")
    if ctx.streams.shape[0] < 2:
        raise PacketDrop("HT packet needs two receive streams")
    p = mcs_params(PhyFormat.HT, mcs)
    n_sym = symbols_for_payload(p, length)
    if n_sym + 5 > n_post:
        raise PacketDrop("HT duration inconsistent with L-SIG spoofing")
    n2 = ctx.n2

    stf_seg = ctx.streams[0, n2 + 368:n2 + 448]
    diags.ht_stf_power = float(np.mean(np.abs(stf_seg) ** 2)) if len(stf_seg) else None

    ltf = np.stack([ctx.symbols(ant, n2 + 448, 2, _HT_ACT, HT_MAP.n_active)
                    for ant in range(2)], axis=2)  # (2 sym, n_act, n_rx)
    est = estimate_ht_mimo_channel(ltf)
    diags.channel = est

    y = np.stack([ctx.symbols(ant, n2 + 608, n_sym, _HT_ACT, HT_MAP.n_active)
                  for ant in range(2)], axis=2)  # (n_sym, n_act, n_rx)
    y = pilot_phase_track(y, _ht_pilot_refs(n_sym), est)
    s_hat, nv_stream = _zf_all(y[:, _HT_DATA_POS, :], est.h[_HT_DATA_POS],
                               noise_var)
    per_stream = []
    for i in range(2):
        llrs = demap_llr(s_hat[:, :, i], p.modulation, nv_stream[:, i])
        per_stream.append(coding.deinterleave_llr(llrs, p.n_cbpss, p.n_bpsc))
    llrs = _deparse_streams(per_stream, p)
    n_info = n_sym * p.bits_per_symbol - coding.N_TAIL
    bits = coding.viterbi_decode_soft(llrs, p.code_rate, n_info)
    service, psdu, crc_ok = _decode_bits_to_psdu(bits, length)
    diags.evm["data"] = _evm(s_hat[:, :, 0], p.modulation)
    return ReceivedPacket(PhyFormat.HT, mcs, psdu[:-4], crc_ok, length, diags)


def _receive_vht(ctx, sig_bits, noise_var, n_post, diags) -> ReceivedPacket:
    mu, nsts, su_mcs = parse_vht_siga(sig_bits)
    n2 = ctx.n2
    if not mu and nsts == 2:
        return _receive_ndp(ctx, n_post, diags)
    n_ltf = 2 if mu else 1

    # Scalar equivalent-channel estimate, averaged over the LTF symbols.
    ltf = ctx.symbols(0, n2 + 448, n_ltf, _HT_ACT, HT_MAP.n_active)
    h = np.mean(ltf, axis=0) / _HT_LTF
    est = ChannelEstimate(ChannelKind.VHT_EQUIVALENT, h, _HT_ACT.copy())
    diags.channel = est

    sigb_start = n2 + 448 + 80 * n_ltf
    sigb_y = ctx.symbols(0, sigb_start, 1, _HT_ACT, HT_MAP.n_active)
    sigb_y = pilot_phase_track(sigb_y, _legacy_pilot_refs(3, 1), est)
    eq = _safe_equalize(sigb_y[0, _HT_DATA_POS], h[_HT_DATA_POS])
    nv = noise_var / np.maximum(np.abs(h[_HT_DATA_POS]) ** 2, NOISE_FLOOR)
    llrs = coding.deinterleave_llr(4.0 * eq.real / nv, 52, 1)
    sigb_bits = coding.viterbi_decode_soft(llrs, Fraction(1, 2), 20)
    length, sigb_mcs = parse_vht_sigb(sigb_bits, mu)
    mcs = sigb_mcs if mu else su_mcs
    try:
        p = mcs_params(PhyFormat.VHT_MU if mu else PhyFormat.VHT_SU, mcs)
    except Exception:
        raise PacketDrop("VHT MCS out of range") from None
    if length < 4:
        raise PacketDrop("VHT length too short for a frame check")
    n_sym = symbols_for_payload(p, length)
    if n_sym + 3 + n_ltf + 1 > n_post:
        raise PacketDrop("VHT duration inconsistent with L-SIG spoofing")

    y = ctx.symbols(0, sigb_start + 80, n_sym, _HT_ACT, HT_MAP.n_active)
    y = pilot_phase_track(y, _vht_pilot_refs(n_sym), est)
    llrs, eq_data = _siso_payload_llrs(y, h, noise_var, p, _HT_DATA_POS)
    n_info = n_sym * p.bits_per_symbol - coding.N_TAIL
    bits = coding.viterbi_decode_soft(llrs, p.code_rate, n_info)
    service, psdu, crc_ok = _decode_bits_to_psdu(bits, length)
    diags.sigb_crc_ok = bool(np.array_equal(coding.crc8(sigb_bits), service[8:16]))
    diags.evm["data"] = _evm(eq_data, p.modulation)
    fmt = PhyFormat.VHT_MU if mu else PhyFormat.VHT_SU
    return ReceivedPacket(fmt, mcs, psdu[:-4], crc_ok, length, diags)


def _receive_ndp(ctx, n_post, diags) -> ReceivedPacket:
    """Sounding frame: report the per-antenna CSI row instead of a payload."""
    n2 = ctx.n2
    ltf = ctx.symbols(0, n2 + 448, 2, _HT_ACT, HT_MAP.n_active)  # (2, n_act)
    csi = (ltf.T @ _P_INV.astype(np.complex128)) / _HT_LTF[:, None]  # (n_act, 2)
    diags.csi = csi
    return ReceivedPacket(PhyFormat.VHT_NDP, 0, b"", True, 0, diags)
