"""OFDM numerology, subcarrier layouts, MCS tables, and cyclic-shift constants.

Single source of truth for the 20 MHz PHY: every other module reads its
constants from here. All tables are immutable module-level data and safe for
concurrent reads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import UnknownMcs


@dataclass(frozen=True)
class OfdmNumerology:
    fft_size: int = 64
    sample_rate: float = 20e6
    subcarrier_spacing: float = 312_500.0
    gi_samples: int = 16
    symbol_samples: int = 80
    symbol_duration: float = 4.0e-6

    def __post_init__(self):
        assert self.symbol_samples == self.fft_size + self.gi_samples
        assert self.subcarrier_spacing == self.sample_rate / self.fft_size
        assert round(self.symbol_duration * self.sample_rate) == self.symbol_samples


NUMEROLOGY = OfdmNumerology()

FFT_SIZE = NUMEROLOGY.fft_size
SAMPLE_RATE = NUMEROLOGY.sample_rate
GI_SAMPLES = NUMEROLOGY.gi_samples
SYMBOL_SAMPLES = NUMEROLOGY.symbol_samples

# Per-antenna cyclic shifts, ns. Antenna 1 is never shifted.
LEGACY_CSD_NS = (0.0, -200.0)
HT_CSD_NS = (0.0, -400.0)


def csd_samples(shift_ns: float) -> float:
    return shift_ns * 1e-9 * SAMPLE_RATE


class PhyFormat(Enum):
    LEGACY = "legacy"
    HT = "ht"
    VHT_SU = "vht_su"
    VHT_MU = "vht_mu"
    VHT_NDP = "vht_ndp"


class Modulation(Enum):
    BPSK = "bpsk"
    QBPSK = "qbpsk"
    QPSK = "qpsk"
    QAM16 = "16qam"
    QAM64 = "64qam"
    QAM256 = "256qam"


@dataclass(frozen=True)
class SubcarrierMap:
    data_indices: tuple
    pilot_indices: tuple

    def __post_init__(self):
        assert 0 not in self.data_indices and 0 not in self.pilot_indices
        assert not set(self.data_indices) & set(self.pilot_indices)

    @property
    def active_indices(self) -> tuple:
        return tuple(sorted(self.data_indices + self.pilot_indices))

    @property
    def n_data(self) -> int:
        return len(self.data_indices)

    @property
    def n_active(self) -> int:
        return len(self.data_indices) + len(self.pilot_indices)


PILOT_INDICES = (-21, -7, 7, 21)
# Base pilot values in subcarrier order (-21, -7, +7, +21).
PILOT_BASE = np.array([1.0, 1.0, 1.0, -1.0])

LEGACY_MAP = SubcarrierMap(
    data_indices=tuple(k for k in range(-26, 27) if k != 0 and k not in PILOT_INDICES),
    pilot_indices=PILOT_INDICES,
)
HT_MAP = SubcarrierMap(
    data_indices=tuple(k for k in range(-28, 29) if k != 0 and k not in PILOT_INDICES),
    pilot_indices=PILOT_INDICES,
)

assert LEGACY_MAP.n_data == 48 and HT_MAP.n_data == 52


def _pilot_polarity_127() -> np.ndarray:
    # x^7 + x^4 + 1 LFSR, all-ones initial state; output bit 0 -> +1, 1 -> -1.
    state = [1] * 7
    seq = np.empty(127, dtype=np.int8)
    for i in range(127):
        out = state[6] ^ state[3]
        state = [out] + state[:6]
        seq[i] = 1 if out == 0 else -1
    return seq


PILOT_POLARITY = _pilot_polarity_127()

# Per-stream pilot patterns for two space-time streams, cycled across symbols.
HT_PILOT_PATTERNS = np.array([[1.0, 1.0, -1.0, -1.0],
                              [1.0, -1.0, -1.0, 1.0]])
SINGLE_STREAM_PILOT_PATTERN = PILOT_BASE.copy()


def legacy_pilot_values(symbol_index: int) -> np.ndarray:
    """Pilot values for a single-stream symbol; index 0 is the signal field."""
    return PILOT_POLARITY[symbol_index % 127] * PILOT_BASE


def ht_pilot_values(data_symbol_index: int, stream: int) -> np.ndarray:
    """Pilot values for HT two-stream data symbol n (0-based); polarity runs from p[3+n]."""
    rot = np.roll(HT_PILOT_PATTERNS[stream], -data_symbol_index)
    return PILOT_POLARITY[(3 + data_symbol_index) % 127] * rot


def vht_pilot_values(data_symbol_index: int) -> np.ndarray:
    """Pilot values shared by all VHT streams for data symbol n; polarity runs from p[4+n]."""
    rot = np.roll(SINGLE_STREAM_PILOT_PATTERN, -data_symbol_index)
    return PILOT_POLARITY[(4 + data_symbol_index) % 127] * rot


def legacy_pilot_matrix(first_symbol_index: int, n_sym: int) -> np.ndarray:
    """(n_sym, 4) pilot values for consecutive single-stream symbols."""
    pol = PILOT_POLARITY[(first_symbol_index + np.arange(n_sym)) % 127]
    return pol[:, None] * PILOT_BASE[None, :]


def _rotating_pattern(pattern: np.ndarray, n_sym: int) -> np.ndarray:
    idx = (np.arange(4)[None, :] + np.arange(n_sym)[:, None]) % 4
    return pattern[idx]


def ht_pilot_matrix(n_sym: int) -> np.ndarray:
    """(n_sym, 4, n_ss) pilot values for the HT two-stream data symbols."""
    pol = PILOT_POLARITY[(3 + np.arange(n_sym)) % 127]
    per_stream = [
        pol[:, None] * _rotating_pattern(HT_PILOT_PATTERNS[i], n_sym) for i in range(2)
    ]
    return np.stack(per_stream, axis=2)


def vht_pilot_matrix(n_sym: int) -> np.ndarray:
    """(n_sym, 4) pilot values shared by all VHT streams."""
    pol = PILOT_POLARITY[(4 + np.arange(n_sym)) % 127]
    return pol[:, None] * _rotating_pattern(SINGLE_STREAM_PILOT_PATTERN, n_sym)


@dataclass(frozen=True)
class McsParams:
    mcs_index: int
    modulation: Modulation
    code_rate: Fraction
    n_ss: int
    n_bpsc: int
    n_sd: int

    @property
    def n_cbpss(self) -> int:
        """Coded bits per symbol per spatial stream."""
        return self.n_sd * self.n_bpsc

    @property
    def n_cbps(self) -> int:
        return self.n_cbpss * self.n_ss

    @property
    def bits_per_symbol(self) -> int:
        """Data bits per OFDM symbol across all streams (N_DBPS)."""
        n = self.n_cbps * self.code_rate
        assert n.denominator == 1
        return int(n)

    @property
    def data_rate(self) -> float:
        return self.bits_per_symbol / NUMEROLOGY.symbol_duration


_MOD_BITS = {
    Modulation.BPSK: 1,
    Modulation.QBPSK: 1,
    Modulation.QPSK: 2,
    Modulation.QAM16: 4,
    Modulation.QAM64: 6,
    Modulation.QAM256: 8,
}

# (modulation, code rate) ladders. Legacy indices 0-7, HT 8-15 (two-stream
# equal modulation), VHT 0-8 single stream.
_BASE_LADDER = (
    (Modulation.BPSK, Fraction(1, 2)),
    (Modulation.BPSK, Fraction(3, 4)),
    (Modulation.QPSK, Fraction(1, 2)),
    (Modulation.QPSK, Fraction(3, 4)),
    (Modulation.QAM16, Fraction(1, 2)),
    (Modulation.QAM16, Fraction(3, 4)),
    (Modulation.QAM64, Fraction(2, 3)),
    (Modulation.QAM64, Fraction(3, 4)),
)
_HT_LADDER = (
    (Modulation.BPSK, Fraction(1, 2)),
    (Modulation.QPSK, Fraction(1, 2)),
    (Modulation.QPSK, Fraction(3, 4)),
    (Modulation.QAM16, Fraction(1, 2)),
    (Modulation.QAM16, Fraction(3, 4)),
    (Modulation.QAM64, Fraction(2, 3)),
    (Modulation.QAM64, Fraction(3, 4)),
    (Modulation.QAM64, Fraction(5, 6)),
)
_VHT_LADDER = _HT_LADDER + ((Modulation.QAM256, Fraction(3, 4)),)


def mcs_params(fmt: PhyFormat, mcs: int) -> McsParams:
    """Complete modulation/coding parameters for (format, mcs).

    Valid ranges: Legacy 0-7, HT 8-15 (N_ss = 2), VHT 0-8 (N_ss = 1).
    """
    if fmt is PhyFormat.LEGACY:
        if not 0 <= mcs <= 7:
            raise UnknownMcs(f"legacy MCS {mcs} not in 0..7")
        mod, rate = _BASE_LADDER[mcs]
        return McsParams(mcs, mod, rate, 1, _MOD_BITS[mod], LEGACY_MAP.n_data)
    if fmt is PhyFormat.HT:
        if not 8 <= mcs <= 15:
            raise UnknownMcs(f"HT MCS {mcs} not in 8..15")
        mod, rate = _HT_LADDER[mcs - 8]
        return McsParams(mcs, mod, rate, 2, _MOD_BITS[mod], HT_MAP.n_data)
    if fmt in (PhyFormat.VHT_SU, PhyFormat.VHT_MU):
        if not 0 <= mcs <= 8:
            raise UnknownMcs(f"VHT MCS {mcs} not in 0..8")
        mod, rate = _VHT_LADDER[mcs]
        return McsParams(mcs, mod, rate, 1, _MOD_BITS[mod], HT_MAP.n_data)
    raise UnknownMcs(f"format {fmt} carries no data MCS")


N_SERVICE_BITS = 16
N_TAIL_BITS = 6


def symbols_for_payload(params: McsParams, payload_octets: int) -> int:
    """Number of data OFDM symbols for a PSDU of payload_octets bytes."""
    if payload_octets < 0:
        raise ValueError("payload_octets must be >= 0")
    n_bits = N_SERVICE_BITS + 8 * payload_octets + N_TAIL_BITS
    return math.ceil(n_bits / params.bits_per_symbol)


# L-SIG RATE bits (R1..R4 in transmission order) per legacy MCS.
LSIG_RATE_BITS = (
    (1, 1, 0, 1),  # 6 Mb/s
    (1, 1, 1, 1),  # 9
    (0, 1, 0, 1),  # 12
    (0, 1, 1, 1),  # 18
    (1, 0, 0, 1),  # 24
    (1, 0, 1, 1),  # 36
    (0, 0, 0, 1),  # 48
    (0, 0, 1, 1),  # 54
)

LEGACY_RATES_MBPS = (6, 9, 12, 18, 24, 36, 48, 54)
HT_RATES_MBPS = (13, 26, 39, 52, 78, 104, 117, 130)
