"""Baseband packet assembly for Legacy, HT (2x2), and VHT (SU / MU / NDP) frames.

Builds every field of the mixed-format preamble, applies cyclic shift
diversity, runs the payload pipeline (scramble, BCC, stream parse, interleave,
QAM map, pilots), and OFDM-modulates onto one or two antennas. MU frames take
a per-subcarrier steering matrix computed by the sounding controller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import coding, params
from .errors import BadShift, FieldOverflow, LengthOverflow, UnknownMcs
from .modulation import map_symbols
from .params import (
    FFT_SIZE,
    GI_SAMPLES,
    HT_CSD_NS,
    HT_MAP,
    LEGACY_CSD_NS,
    LEGACY_MAP,
    LSIG_RATE_BITS,
    SAMPLE_RATE,
    SYMBOL_SAMPLES,
    McsParams,
    Modulation,
    PhyFormat,
    mcs_params,
    symbols_for_payload,
)

# Short training sequence: 12 tones on multiples of 4, boosted so the total
# symbol energy matches the 52-tone fields.
_STF_TONE_K = np.array([-24, -20, -16, -12, -8, -4, 4, 8, 12, 16, 20, 24])
_STF_TONE_VAL = np.sqrt(13.0 / 6.0) * np.array(
    [1 + 1j, -1 - 1j, 1 + 1j, -1 - 1j, -1 - 1j, 1 + 1j,
     -1 - 1j, -1 - 1j, 1 + 1j, 1 + 1j, 1 + 1j, 1 + 1j]
)

# Long training sequence over k = -26..26 (0 at DC).
LTF_SEQUENCE = {
    k: v for k, v in zip(
        range(-26, 27),
        [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1,
         1, -1, 1, 1, 1, 1, 0,
         1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1,
         -1, 1, -1, 1, 1, 1, 1],
    ) if v != 0
}

# HT/VHT long training sequence extends the legacy one to k = +-28.
HTLTF_SEQUENCE = dict(LTF_SEQUENCE)
HTLTF_SEQUENCE.update({-28: 1, -27: 1, 27: -1, 28: 1})

# Orthogonal stream-to-symbol mapping for the two-stream LTFs; rows are
# streams, columns are LTF symbols.
P_MATRIX = np.array([[1.0, -1.0], [1.0, 1.0]])

LSTF_LEN = 160
LLTF_LEN = 160
PREAMBLE_LEN = LSTF_LEN + LLTF_LEN


@dataclass(frozen=True)
class MuUser:
    mcs: int
    payload: bytes


@dataclass(frozen=True)
class PhyConfig:
    format: PhyFormat
    mcs: int = 0
    payload: bytes = b""
    n_tx: int = 0  # 0 = derive from format
    mu_users: tuple = ()

    def __post_init__(self):
        fmt = self.format
        n_tx = self.n_tx or (1 if fmt in (PhyFormat.LEGACY, PhyFormat.VHT_SU) else 2)
        object.__setattr__(self, "n_tx", n_tx)
        if fmt is PhyFormat.LEGACY:
            if n_tx not in (1, 2):
                raise ValueError("legacy frames use 1 or 2 antennas")
            mcs_params(fmt, self.mcs)
        elif fmt is PhyFormat.HT:
            if n_tx != 2:
                raise ValueError("HT frames are 2x2 here")
            mcs_params(fmt, self.mcs)
        elif fmt is PhyFormat.VHT_SU:
            if n_tx != 1:
                raise ValueError("VHT SU frames are single antenna here")
            mcs_params(fmt, self.mcs)
        elif fmt is PhyFormat.VHT_MU:
            if n_tx != 2 or len(self.mu_users) != 2:
                raise ValueError("VHT MU frames need 2 antennas and exactly 2 users")
            for u in self.mu_users:
                mcs_params(PhyFormat.VHT_MU, u.mcs)
        elif fmt is PhyFormat.VHT_NDP:
            if self.payload:
                raise ValueError("an NDP carries no payload")
            if n_tx != 2:
                raise ValueError("sounding NDPs use both antennas")

    @property
    def n_ss(self) -> int:
        if self.format is PhyFormat.HT:
            return 2
        if self.format in (PhyFormat.VHT_MU, PhyFormat.VHT_NDP):
            return 2
        return 1


@dataclass
class TxFrame:
    samples: np.ndarray  # (n_tx, n_samples) complex128
    offsets: dict
    n_data_symbols: int
    config: PhyConfig

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def data_start(self) -> int:
        return self.offsets["data"]


def _spectrum64(values: np.ndarray, indices) -> np.ndarray:
    """Embed active-subcarrier values into full FFT bins (leading axes kept)."""
    values = np.asarray(values, dtype=np.complex128)
    spec = np.zeros(values.shape[:-1] + (FFT_SIZE,), dtype=np.complex128)
    spec[..., np.asarray(indices) % FFT_SIZE] = values
    return spec


def _csd_ramp(indices, shift_ns: float) -> np.ndarray:
    k = np.asarray(indices, dtype=np.float64)
    shift_samples = shift_ns * 1e-9 * SAMPLE_RATE
    return np.exp(-2j * np.pi * k * shift_samples / FFT_SIZE)


def _time_body(spec64: np.ndarray, n_active_norm: int) -> np.ndarray:
    return np.fft.ifft(spec64, axis=-1) * (FFT_SIZE / math.sqrt(n_active_norm))


def _add_gi(body: np.ndarray) -> np.ndarray:
    return np.concatenate([body[..., -GI_SAMPLES:], body], axis=-1)


def ofdm_modulate(freq_symbols: np.ndarray, indices, cyclic_shift_ns: float = 0.0,
                  n_active_norm: int | None = None) -> np.ndarray:
    """One OFDM symbol (80 samples) from active-subcarrier values.

    The cyclic shift is applied as the per-subcarrier phase ramp
    exp(-j 2 pi k dF T_cs), equivalent to circularly rotating the 64-sample
    body, then the last 16 samples are prepended as the guard interval.
    """
    if abs(cyclic_shift_ns) * 1e-9 >= FFT_SIZE / SAMPLE_RATE:
        raise BadShift("cyclic shift magnitude must stay below the FFT period")
    values = np.asarray(freq_symbols, dtype=np.complex128)
    if n_active_norm is None:
        n_active_norm = len(np.asarray(indices))
    shifted = values * _csd_ramp(indices, cyclic_shift_ns)
    body = _time_body(_spectrum64(shifted, indices), n_active_norm)
    return _add_gi(body)


def _symbols_to_antennas(spectra: np.ndarray, indices, csd_ns, n_active_norm: int) -> np.ndarray:
    """(n_sym, n_active, n_ant) spectra -> (n_ant, n_sym*80) time samples."""
    n_sym, _, n_ant = spectra.shape
    out = np.empty((n_ant, n_sym * SYMBOL_SAMPLES), dtype=np.complex128)
    for ant in range(n_ant):
        shifted = spectra[:, :, ant] * _csd_ramp(indices, csd_ns[ant])
        body = _time_body(_spectrum64(shifted, indices), n_active_norm)
        out[ant] = _add_gi(body).reshape(-1)
    return out


def _single_stream_symbols(values: np.ndarray, indices, n_tx: int, csd_ns,
                           n_active_norm: int) -> np.ndarray:
    """Duplicate one stream across antennas with CSD and 1/sqrt(n_tx) scaling."""
    values = np.atleast_2d(np.asarray(values, dtype=np.complex128))
    spectra = np.repeat(values[:, :, None], n_tx, axis=2) / math.sqrt(n_tx)
    return _symbols_to_antennas(spectra, indices, csd_ns, n_active_norm)


# --- training fields ---------------------------------------------------------

def _stf_body(csd_ns: float = 0.0) -> np.ndarray:
    vals = _STF_TONE_VAL * _csd_ramp(_STF_TONE_K, csd_ns)
    return _time_body(_spectrum64(vals, _STF_TONE_K), LEGACY_MAP.n_active)


def _ltf_body(csd_ns: float = 0.0) -> np.ndarray:
    k = np.array(sorted(LTF_SEQUENCE))
    vals = np.array([LTF_SEQUENCE[i] for i in sorted(LTF_SEQUENCE)], dtype=np.complex128)
    vals = vals * _csd_ramp(k, csd_ns)
    return _time_body(_spectrum64(vals, k), LEGACY_MAP.n_active)


def legacy_stf_short_symbol() -> np.ndarray:
    """Canonical 16-sample short training symbol (single antenna, unit scale)."""
    return _stf_body()[:16].copy()


def legacy_ltf_symbol() -> np.ndarray:
    """Canonical 64-sample long training symbol."""
    return _ltf_body().copy()


def build_legacy_preamble(n_tx: int) -> np.ndarray:
    """L-STF (10 short symbols) and L-LTF (GI2 + two long symbols), per antenna."""
    out = np.empty((n_tx, PREAMBLE_LEN), dtype=np.complex128)
    scale = 1.0 / math.sqrt(n_tx)
    for ant in range(n_tx):
        stf = _stf_body(LEGACY_CSD_NS[ant]) * scale
        ltf = _ltf_body(LEGACY_CSD_NS[ant]) * scale
        out[ant, :LSTF_LEN] = np.concatenate([stf, stf, stf[:32]])
        out[ant, LSTF_LEN:] = np.concatenate([ltf[-32:], ltf, ltf])
    return out


# --- signal fields -----------------------------------------------------------

def _uint_bits(value: int, width: int) -> list:
    if value < 0 or value >= (1 << width):
        raise FieldOverflow(f"value {value} does not fit in {width} bits")
    return [(value >> i) & 1 for i in range(width)]  # LSB first


def _coded_signal_symbols(bits: np.ndarray, n_symbols: int) -> np.ndarray:
    """Rate-1/2 encode + per-symbol legacy interleave; returns (n_symbols, 48) bits."""
    coded = coding.bcc_encode(np.asarray(bits, dtype=np.uint8), Fraction(1, 2))
    assert len(coded) == 48 * n_symbols
    inter = coding.interleave(coded, 48, 1)
    return inter.reshape(n_symbols, 48)


def _field_spectrum(data_values: np.ndarray, smap, pilot_values: np.ndarray) -> np.ndarray:
    """Place one symbol's data and pilot values on the active subcarriers."""
    active = smap.active_indices
    vals = np.zeros(len(active), dtype=np.complex128)
    pos = {k: i for i, k in enumerate(active)}
    vals[[pos[k] for k in smap.data_indices]] = data_values
    vals[[pos[k] for k in smap.pilot_indices]] = pilot_values
    return vals


def lsig_bits(rate_bits, length_octets: int) -> np.ndarray:
    if not 0 <= length_octets <= 4095:
        raise LengthOverflow("L-SIG length is a 12-bit field")
    bits = list(rate_bits) + [0] + _uint_bits(length_octets, 12)
    bits.append(sum(bits) % 2)  # even parity over the first 17 bits
    bits += [0] * 6
    return np.array(bits, dtype=np.uint8)


def build_lsig(rate_bits, length_octets: int, n_tx: int = 1) -> np.ndarray:
    """The 24-bit legacy signal field as one BPSK symbol per antenna."""
    sym_bits = _coded_signal_symbols(lsig_bits(rate_bits, length_octets), 1)[0]
    data = map_symbols(sym_bits, Modulation.BPSK)
    vals = _field_spectrum(data, LEGACY_MAP, params.legacy_pilot_values(0))
    return _single_stream_symbols(vals, LEGACY_MAP.active_indices, n_tx,
                                  LEGACY_CSD_NS, LEGACY_MAP.n_active)


def ht_sig_bits(mcs: int, length_octets: int) -> np.ndarray:
    if not 8 <= mcs <= 15:
        raise UnknownMcs(f"HT MCS {mcs} not in 8..15")
    sig1 = _uint_bits(mcs, 7) + [0] + _uint_bits(length_octets, 16)
    sig2 = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]  # smoothing, not-sounding, reserved, ...
    crc = coding.crc8(np.array(sig1 + sig2, dtype=np.uint8))
    return np.array(sig1 + sig2 + list(crc) + [0] * 6, dtype=np.uint8)


def build_ht_sig(mcs: int, length_octets: int, n_tx: int = 2) -> np.ndarray:
    """HT-SIG1/2: jointly coded, QBPSK, on the equivalent single-stream channel."""
    sym_bits = _coded_signal_symbols(ht_sig_bits(mcs, length_octets), 2)
    out = []
    for n, bits in enumerate(sym_bits, start=1):
        data = map_symbols(bits, Modulation.QBPSK)
        vals = _field_spectrum(data, LEGACY_MAP, params.legacy_pilot_values(n))
        out.append(_single_stream_symbols(vals, LEGACY_MAP.active_indices, n_tx,
                                          LEGACY_CSD_NS, LEGACY_MAP.n_active))
    return np.concatenate(out, axis=1)


def vht_siga_bits(mu: bool, nsts: int, su_mcs: int = 0) -> np.ndarray:
    group_id = 1 if mu else 0
    if mu:
        nsts_field = _uint_bits(1, 3) + _uint_bits(1, 3) + [0] * 6  # one stream per user
    else:
        nsts_field = _uint_bits(nsts, 3) + [0] * 9
    a1 = [0, 0] + [1] + [0] + _uint_bits(group_id, 6) + nsts_field + [0] + [1]
    a2 = [0, 0, 0, 0] + _uint_bits(0 if mu else su_mcs, 4) + [1 if mu else 0] + [1]
    crc = coding.crc8(np.array(a1 + a2, dtype=np.uint8))
    return np.array(a1 + a2 + list(crc) + [0] * 6, dtype=np.uint8)


def build_vht_siga(mu: bool, nsts: int, su_mcs: int = 0, n_tx: int = 2) -> np.ndarray:
    """VHT-SIG-A1 (BPSK) and VHT-SIG-A2 (QBPSK) on the single-stream channel."""
    sym_bits = _coded_signal_symbols(vht_siga_bits(mu, nsts, su_mcs), 2)
    out = []
    for n, (bits, mod) in enumerate(zip(sym_bits, (Modulation.BPSK, Modulation.QBPSK)), start=1):
        data = map_symbols(bits, mod)
        vals = _field_spectrum(data, LEGACY_MAP, params.legacy_pilot_values(n))
        out.append(_single_stream_symbols(vals, LEGACY_MAP.active_indices, n_tx,
                                          LEGACY_CSD_NS, LEGACY_MAP.n_active))
    return np.concatenate(out, axis=1)


def vht_sigb_bits(length_octets: int, mcs: int = 0, mu: bool = False) -> np.ndarray:
    if mu:
        bits = _uint_bits(length_octets, 16) + _uint_bits(mcs, 4)
    else:
        bits = _uint_bits(length_octets, 17) + [1, 1, 1]
    return np.array(bits + [0] * 6, dtype=np.uint8)


def _vht_sigb_symbol(bits26: np.ndarray) -> np.ndarray:
    """SIG-B data values on the 52 HT/VHT data subcarriers (BPSK)."""
    coded = coding.bcc_encode(bits26, Fraction(1, 2))
    inter = coding.interleave(coded, 52, 1)
    return map_symbols(inter, Modulation.BPSK)


def _vht_stf_values() -> np.ndarray:
    return _STF_TONE_VAL.copy()


def build_mimo_ltf(n_ss: int = 2, steering: np.ndarray | None = None,
                   n_tx: int = 2, csd_ns=HT_CSD_NS) -> np.ndarray:
    """HT/VHT long training symbols mapped across streams by the P matrix.

    Returns (n_tx, n_ss*80) samples. With steering, the per-stream values are
    multiplied by Q[k] on every subcarrier before the antenna map.
    """
    active = HT_MAP.active_indices
    seq = np.array([HTLTF_SEQUENCE[k] for k in active], dtype=np.complex128)
    scale = 1.0 / math.sqrt(n_ss)
    spectra = np.empty((n_ss, len(active), n_ss), dtype=np.complex128)  # (sym, k, stream)
    for m in range(n_ss):
        for i in range(n_ss):
            spectra[m, :, i] = P_MATRIX[i, m] * seq * scale
    ant = _apply_steering(spectra, steering, n_tx)
    return _symbols_to_antennas(ant, active, csd_ns[:n_tx], HT_MAP.n_active)


def _apply_steering(spectra: np.ndarray, steering: np.ndarray | None, n_tx: int) -> np.ndarray:
    """(n_sym, k, n_ss) stream spectra -> (n_sym, k, n_tx) antenna spectra."""
    n_ss = spectra.shape[2]
    if steering is not None:
        return np.einsum("kij,nkj->nki", steering, spectra)
    if n_ss == n_tx:
        return spectra
    if n_ss == 1:
        return np.repeat(spectra, n_tx, axis=2) / math.sqrt(n_tx)
    raise ValueError("no spatial map for this stream/antenna combination")


# --- data portion ------------------------------------------------------------

def _psdu_coded_bits(psdu: bytes, params_: McsParams, n_sym: int,
                     seed: int, service_tail: np.ndarray | None = None) -> np.ndarray:
    """Scramble + tail + pad + BCC for one user; pads stay zero so the trellis
    ends in the zero state at every symbol boundary past the tail."""
    psdu_bits = coding.bits_from_bytes(psdu)
    service = np.zeros(16, dtype=np.uint8)
    if service_tail is not None:
        service[8:] = service_tail
    scrambled = coding.scramble(np.concatenate([service, psdu_bits]), seed)
    n_pad = n_sym * params_.bits_per_symbol - len(scrambled) - coding.N_TAIL
    data = np.concatenate([scrambled, np.zeros(coding.N_TAIL + n_pad, dtype=np.uint8)])
    return coding.bcc_encode(data, params_.code_rate)


def _parse_streams(coded: np.ndarray, params_: McsParams) -> list:
    """Round-robin stream parser in blocks of max(n_bpsc/2, 1) bits."""
    if params_.n_ss == 1:
        return [coded]
    s = max(params_.n_bpsc // 2, 1)
    blocks = coded.reshape(-1, params_.n_ss, s)
    return [blocks[:, i, :].reshape(-1) for i in range(params_.n_ss)]


def _stream_data_spectra(stream_bits: list, params_: McsParams, smap, fmt: PhyFormat) -> np.ndarray:
    """Interleave, map, and add pilots; returns (n_sym, n_active, n_ss)."""
    n_sym = len(stream_bits[0]) // params_.n_cbpss
    active = smap.active_indices
    pos = {k: i for i, k in enumerate(active)}
    data_pos = [pos[k] for k in smap.data_indices]
    pilot_pos = [pos[k] for k in smap.pilot_indices]
    if fmt is PhyFormat.LEGACY:
        pilots = params.legacy_pilot_matrix(1, n_sym)[:, :, None]
    elif fmt is PhyFormat.HT:
        pilots = params.ht_pilot_matrix(n_sym)
    else:
        pilots = params.vht_pilot_matrix(n_sym)[:, :, None]
    out = np.zeros((n_sym, len(active), params_.n_ss), dtype=np.complex128)
    for i, bits in enumerate(stream_bits):
        inter = coding.interleave(bits, params_.n_cbpss, params_.n_bpsc)
        pts = map_symbols(inter, params_.modulation).reshape(n_sym, smap.n_data)
        out[:, data_pos, i] = pts
        out[:, pilot_pos, i] = pilots[:, :, min(i, pilots.shape[2] - 1)]
    return out


def _spoofed_lsig_length(n_post_lsig_symbols: int) -> int:
    # Lowest-rate legacy decode of this length spans exactly the same symbols.
    return 3 * n_post_lsig_symbols - 3


def assemble_packet(config: PhyConfig, steering: np.ndarray | None = None,
                    scrambler_seed: int = coding.DEFAULT_SCRAMBLER_SEED) -> TxFrame:
    """Build the complete per-antenna baseband frame for any supported format."""
    fmt = config.format
    n_tx = config.n_tx
    pieces = [build_legacy_preamble(n_tx)]
    offsets = {"l_stf": 0, "l_ltf": LSTF_LEN}
    cursor = PREAMBLE_LEN

    def push(name, block):
        nonlocal cursor
        offsets[name] = cursor
        pieces.append(block)
        cursor += block.shape[1]

    if fmt is PhyFormat.LEGACY:
        p = mcs_params(fmt, config.mcs)
        psdu = coding.append_crc32(config.payload)
        n_sym = symbols_for_payload(p, len(psdu))
        push("l_sig", build_lsig(LSIG_RATE_BITS[config.mcs], len(psdu), n_tx))
        coded = _psdu_coded_bits(psdu, p, n_sym, scrambler_seed)
        spectra = _stream_data_spectra(_parse_streams(coded, p), p, LEGACY_MAP, fmt)
        ant = _apply_steering(spectra, None, n_tx)
        push("data", _symbols_to_antennas(ant, LEGACY_MAP.active_indices,
                                          LEGACY_CSD_NS[:n_tx], LEGACY_MAP.n_active))

    elif fmt is PhyFormat.HT:
        p = mcs_params(fmt, config.mcs)
        psdu = coding.append_crc32(config.payload)
        n_sym = symbols_for_payload(p, len(psdu))
        spoof = _spoofed_lsig_length(2 + 1 + 2 + n_sym)
        push("l_sig", build_lsig(LSIG_RATE_BITS[0], spoof, n_tx))
        push("ht_sig", build_ht_sig(config.mcs, len(psdu), n_tx))
        push("ht_stf", _single_stream_symbols(_vht_stf_values(), _STF_TONE_K, n_tx,
                                              HT_CSD_NS, HT_MAP.n_active))
        push("ht_ltf", build_mimo_ltf(2, None, n_tx))
        coded = _psdu_coded_bits(psdu, p, n_sym, scrambler_seed)
        spectra = _stream_data_spectra(_parse_streams(coded, p), p, HT_MAP, fmt)
        spectra /= math.sqrt(p.n_ss)
        ant = _apply_steering(spectra, None, n_tx)
        push("data", _symbols_to_antennas(ant, HT_MAP.active_indices,
                                          HT_CSD_NS[:n_tx], HT_MAP.n_active))

    elif fmt is PhyFormat.VHT_SU:
        p = mcs_params(fmt, config.mcs)
        psdu = coding.append_crc32(config.payload)
        n_sym = symbols_for_payload(p, len(psdu))
        spoof = _spoofed_lsig_length(2 + 1 + 1 + 1 + n_sym)
        push("l_sig", build_lsig(LSIG_RATE_BITS[0], spoof, n_tx))
        push("vht_sig_a", build_vht_siga(False, 1, config.mcs, n_tx))
        push("vht_stf", _single_stream_symbols(_vht_stf_values(), _STF_TONE_K, n_tx,
                                               HT_CSD_NS, HT_MAP.n_active))
        push("vht_ltf", build_mimo_ltf(1, None, n_tx))
        sigb = vht_sigb_bits(len(psdu))
        sigb_vals = _field_spectrum(_vht_sigb_symbol(sigb), HT_MAP, params.legacy_pilot_values(3))
        push("vht_sig_b", _single_stream_symbols(sigb_vals, HT_MAP.active_indices, n_tx,
                                                 HT_CSD_NS, HT_MAP.n_active))
        coded = _psdu_coded_bits(psdu, p, n_sym, scrambler_seed,
                                 service_tail=coding.crc8(sigb[:20]))
        spectra = _stream_data_spectra(_parse_streams(coded, p), p, HT_MAP, fmt)
        ant = _apply_steering(spectra, None, n_tx)
        push("data", _symbols_to_antennas(ant, HT_MAP.active_indices,
                                          HT_CSD_NS[:n_tx], HT_MAP.n_active))

    elif fmt is PhyFormat.VHT_NDP:
        n_sym = 0
        spoof = _spoofed_lsig_length(2 + 1 + 2 + 1)
        push("l_sig", build_lsig(LSIG_RATE_BITS[0], spoof, n_tx))
        push("vht_sig_a", build_vht_siga(False, 2, 0, n_tx))
        push("vht_stf", _single_stream_symbols(_vht_stf_values(), _STF_TONE_K, n_tx,
                                               HT_CSD_NS, HT_MAP.n_active))
        push("vht_ltf", build_mimo_ltf(2, None, n_tx))
        sigb_vals = _field_spectrum(_vht_sigb_symbol(vht_sigb_bits(0)), HT_MAP,
                                    params.legacy_pilot_values(3))
        push("vht_sig_b", _single_stream_symbols(sigb_vals, HT_MAP.active_indices, n_tx,
                                                 HT_CSD_NS, HT_MAP.n_active))
        offsets["data"] = cursor

    elif fmt is PhyFormat.VHT_MU:
        if steering is None:
            raise ValueError("VHT MU frames require a steering matrix")
        users = config.mu_users
        uparams = [mcs_params(PhyFormat.VHT_MU, u.mcs) for u in users]
        psdus = [coding.append_crc32(u.payload) for u in users]
        n_sym = max(symbols_for_payload(p, len(s)) for p, s in zip(uparams, psdus))
        spoof = _spoofed_lsig_length(2 + 1 + 2 + 1 + n_sym)
        push("l_sig", build_lsig(LSIG_RATE_BITS[0], spoof, n_tx))
        push("vht_sig_a", build_vht_siga(True, 2, 0, n_tx))
        active = HT_MAP.active_indices
        scale = 1.0 / math.sqrt(2.0)

        stf = _vht_stf_values()
        stf_stream = np.zeros((1, len(active), 2), dtype=np.complex128)
        pos = {k: i for i, k in enumerate(active)}
        stf_pos = [pos[k] for k in _STF_TONE_K]
        stf_stream[0, stf_pos, 0] = stf * scale
        stf_stream[0, stf_pos, 1] = stf * scale
        push("vht_stf", _symbols_to_antennas(_apply_steering(stf_stream, steering, n_tx),
                                             active, HT_CSD_NS, HT_MAP.n_active))

        # Each user's LTF rides only on that user's steered stream; the two
        # identical symbols support the two-symbol averaged estimate.
        seq = np.array([HTLTF_SEQUENCE[k] for k in active], dtype=np.complex128)
        ltf_stream = np.zeros((2, len(active), 2), dtype=np.complex128)
        ltf_stream[:, :, 0] = seq * scale
        ltf_stream[:, :, 1] = seq * scale
        push("vht_ltf", _symbols_to_antennas(_apply_steering(ltf_stream, steering, n_tx),
                                             active, HT_CSD_NS, HT_MAP.n_active))

        sigb_bits = [vht_sigb_bits(len(s), u.mcs, mu=True) for s, u in zip(psdus, users)]
        sigb_stream = np.zeros((1, len(active), 2), dtype=np.complex128)
        for i, b in enumerate(sigb_bits):
            sigb_stream[0, :, i] = _field_spectrum(_vht_sigb_symbol(b), HT_MAP,
                                                   params.legacy_pilot_values(3)) * scale
        push("vht_sig_b", _symbols_to_antennas(_apply_steering(sigb_stream, steering, n_tx),
                                               active, HT_CSD_NS, HT_MAP.n_active))

        user_spectra = []
        for p, psdu, b in zip(uparams, psdus, sigb_bits):
            coded = _psdu_coded_bits(psdu, p, n_sym, scrambler_seed,
                                     service_tail=coding.crc8(b[:20]))
            user_spectra.append(_stream_data_spectra([coded], p, HT_MAP, PhyFormat.VHT_MU))
        stream_spec = np.concatenate([s * scale for s in user_spectra], axis=2)
        push("data", _symbols_to_antennas(_apply_steering(stream_spec, steering, n_tx),
                                          active, HT_CSD_NS, HT_MAP.n_active))

    else:
        raise ValueError(f"unsupported format {fmt}")

    samples = np.concatenate(pieces, axis=1)
    assert (samples.shape[1] - PREAMBLE_LEN) % SYMBOL_SAMPLES == 0
    return TxFrame(samples=samples, offsets=offsets, n_data_symbols=n_sym, config=config)
