"""Gray-mapped constellations and the simplified (max-log) soft demapper.

All constellations are normalized to unit average energy. QBPSK is BPSK
rotated onto the imaginary axis and is used only for format signaling.
"""
from __future__ import annotations

import numpy as np

from .errors import LengthMismatch, NonPositiveNoiseVar
from .params import Modulation

NORMALIZATION = {
    Modulation.BPSK: 1.0,
    Modulation.QBPSK: 1.0,
    Modulation.QPSK: 1.0 / np.sqrt(2.0),
    Modulation.QAM16: 1.0 / np.sqrt(10.0),
    Modulation.QAM64: 1.0 / np.sqrt(42.0),
    Modulation.QAM256: 1.0 / np.sqrt(170.0),
}

BITS_PER_POINT = {
    Modulation.BPSK: 1,
    Modulation.QBPSK: 1,
    Modulation.QPSK: 2,
    Modulation.QAM16: 4,
    Modulation.QAM64: 6,
    Modulation.QAM256: 8,
}


def _rail_tables(m: int):
    """Gray tables for one rail with 2^m levels.

    Level index i maps to amplitude 2i - (2^m - 1) and bit pattern gray(i),
    MSB first; this reproduces the standard Gray labelings for every QAM size.
    """
    n = 1 << m
    idx = np.arange(n)
    gray = idx ^ (idx >> 1)
    levels = (2 * idx - (n - 1)).astype(np.float64)
    bits = ((gray[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)
    # bits_to_index[packed gray bits] = level index
    bits_to_index = np.empty(n, dtype=np.int64)
    packed = (bits * (1 << np.arange(m - 1, -1, -1))).sum(axis=1)
    bits_to_index[packed] = idx
    return levels, bits, bits_to_index


_RAILS = {m: _rail_tables(m) for m in (1, 2, 3, 4)}


def map_symbols(bits: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Map a bit buffer to complex constellation points."""
    bits = np.asarray(bits, dtype=np.uint8)
    bpp = BITS_PER_POINT[modulation]
    if len(bits) % bpp:
        raise LengthMismatch(f"bit count {len(bits)} not a multiple of {bpp}")
    a = NORMALIZATION[modulation]
    if modulation is Modulation.BPSK:
        return a * (2.0 * bits - 1.0) + 0j
    if modulation is Modulation.QBPSK:
        return 1j * a * (2.0 * bits - 1.0)
    m = bpp // 2
    levels, _, bits_to_index = _RAILS[m]
    grouped = bits.reshape(-1, bpp)
    weights = 1 << np.arange(m - 1, -1, -1)
    i_idx = bits_to_index[(grouped[:, :m] * weights).sum(axis=1)]
    q_idx = bits_to_index[(grouped[:, m:] * weights).sum(axis=1)]
    return a * (levels[i_idx] + 1j * levels[q_idx])


def _rail_llrs(y: np.ndarray, m: int, amp: float, noise_var) -> np.ndarray:
    """Max-log LLRs for the m bits of one rail; shape (..., m)."""
    levels, bits, _ = _RAILS[m]
    d = (y[..., None] - amp * levels) ** 2  # (..., n_levels)
    big = np.inf
    out = np.empty(y.shape + (m,))
    for t in range(m):
        d0 = np.where(bits[:, t] == 0, d, big).min(axis=-1)
        d1 = np.where(bits[:, t] == 1, d, big).min(axis=-1)
        out[..., t] = d0 - d1
    return out / np.asarray(noise_var)[..., None]


def demap_llr(symbols: np.ndarray, modulation: Modulation, noise_var) -> np.ndarray:
    """Per-bit LLRs, positive = bit 1. Accepts arrays; noise_var broadcasts.

    Exact for BPSK/QPSK; piecewise-linear max-log for the square QAMs. The
    BPSK value follows the 4 Re(y) / noise_var convention.
    """
    noise_var = np.asarray(noise_var, dtype=np.float64)
    if np.any(noise_var <= 0):
        raise NonPositiveNoiseVar("noise_var must be > 0")
    symbols = np.asarray(symbols)
    a = NORMALIZATION[modulation]
    if modulation is Modulation.BPSK:
        return (4.0 * symbols.real / noise_var).reshape(-1)
    if modulation is Modulation.QBPSK:
        return (4.0 * symbols.imag / noise_var).reshape(-1)
    m = BITS_PER_POINT[modulation] // 2
    llr_i = _rail_llrs(symbols.real, m, a, noise_var)
    llr_q = _rail_llrs(symbols.imag, m, a, noise_var)
    return np.concatenate([llr_i, llr_q], axis=-1).reshape(-1)


def hard_decisions(symbols: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Nearest-neighbor bit decisions (used for EVM and sanity checks)."""
    nv = np.ones(np.shape(symbols))
    return (demap_llr(symbols, modulation, nv) > 0).astype(np.uint8)


def constellation_points(modulation: Modulation) -> np.ndarray:
    """Every point of the constellation, indexed by packed bit label."""
    bpp = BITS_PER_POINT[modulation]
    n = 1 << bpp
    labels = ((np.arange(n)[:, None] >> np.arange(bpp - 1, -1, -1)) & 1).astype(np.uint8)
    return map_symbols(labels.reshape(-1), modulation)
