"""Bit-level processing: scrambler, convolutional code, soft Viterbi, interleaver, CRCs.

Bit buffers are numpy uint8 arrays of 0/1 in transmission order; octets are
serialized LSB-first. LLR buffers are float arrays with the project-wide sign
convention: positive LLR means bit value 1 is more likely.
"""
from __future__ import annotations

import binascii
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import LengthMismatch, UnsupportedRate, ZeroSeed

# Generator taps for the K=7 code, index j = delay of j samples.
_G0_TAPS = np.array([1, 0, 1, 1, 0, 1, 1], dtype=np.uint8)  # 133 octal
_G1_TAPS = np.array([1, 1, 1, 1, 0, 0, 1], dtype=np.uint8)  # 171 octal
CONSTRAINT_LENGTH = 7
N_TAIL = 6

# Puncture masks over the mother stream [A0 B0 A1 B1 ...]; 1 = transmitted.
_PUNCTURE = {
    Fraction(1, 2): np.array([1, 1], dtype=bool),
    Fraction(2, 3): np.array([1, 1, 1, 0], dtype=bool),
    Fraction(3, 4): np.array([1, 1, 1, 0, 0, 1], dtype=bool),
    Fraction(5, 6): np.array([1, 1, 1, 0, 0, 1, 1, 0, 0, 1], dtype=bool),
}

DEFAULT_SCRAMBLER_SEED = 0b1011101


def bits_from_bytes(data: bytes) -> np.ndarray:
    """Serialize octets to bits, LSB of each octet first."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")


def bytes_from_bits(bits: np.ndarray) -> bytes:
    if len(bits) % 8:
        raise LengthMismatch("bit count is not a whole number of octets")
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def scrambler_sequence(seed: int, n: int) -> np.ndarray:
    """First n output bits of the x^7 + x^4 + 1 LFSR started from a 7-bit seed.

    Seed bit 6 (MSB) is the oldest register stage x7, bit 0 the newest x1.
    The sequence is periodic with period 127.
    """
    if not 0 < seed < 128:
        raise ZeroSeed("scrambler seed must be a nonzero 7-bit value")
    state = [(seed >> (6 - i)) & 1 for i in range(7)]  # [x7 ... x1]
    period = np.empty(127, dtype=np.uint8)
    for i in range(127):
        out = state[0] ^ state[3]  # x7 xor x4
        state = state[1:] + [out]
        period[i] = out
    reps = -(-n // 127)
    return np.tile(period, reps)[:n]


def scramble(bits: np.ndarray, seed: int = DEFAULT_SCRAMBLER_SEED) -> np.ndarray:
    """XOR with the scrambler sequence; self-inverse for any nonzero seed."""
    bits = np.asarray(bits, dtype=np.uint8)
    return bits ^ scrambler_sequence(seed, len(bits))


def seed_from_scrambled_service(scrambled_bits: np.ndarray) -> int:
    """Recover the transmit seed from the first 7 scrambled service bits.

    The service field starts with 7 zero bits, so those positions carry the
    LFSR output directly; after emitting them the register holds exactly those
    bits, and stepping it backwards 7 times yields the initial seed.
    """
    out = [int(b) & 1 for b in scrambled_bits[:7]]
    state = out[:]  # [x7 .. x1] after the 7th output equals [o0 .. o6]
    for _ in range(7):
        # Invert one shift: new = [p6..p1, o], o = p7 ^ p4  =>  p7 = x1 ^ x5.
        state = [state[6] ^ state[2]] + state[:6]
    seed = 0
    for b in state:  # [x7 .. x1], MSB first
        seed = (seed << 1) | b
    return seed


def bcc_encode(bits: np.ndarray, rate: Fraction) -> np.ndarray:
    """K=7 convolutional encoder (133/171 octal) with standard puncturing.

    The caller appends the 6 zero tail bits; the encoder starts from the zero
    state and does not flush.
    """
    if rate not in _PUNCTURE:
        raise UnsupportedRate(f"rate {rate} not supported")
    bits = np.asarray(bits, dtype=np.uint8)
    n = len(bits)
    a = np.convolve(bits, _G0_TAPS)[:n] & 1
    b = np.convolve(bits, _G1_TAPS)[:n] & 1
    mother = np.empty(2 * n, dtype=np.uint8)
    mother[0::2] = a
    mother[1::2] = b
    mask = _puncture_mask(rate, 2 * n)
    return mother[mask]


def _puncture_mask(rate: Fraction, n_mother: int) -> np.ndarray:
    pattern = _PUNCTURE[rate]
    reps = -(-n_mother // len(pattern))
    return np.tile(pattern, reps)[:n_mother]


def punctured_length(rate: Fraction, n_input_bits: int) -> int:
    return int(np.count_nonzero(_puncture_mask(rate, 2 * n_input_bits)))


# State s holds the previous 6 input bits, newest in bit 5. A transition on
# input u evaluates the taps over the 7-bit register (u << 6) | s.
def _transition_tables():
    next_state = np.empty((64, 2), dtype=np.int64)
    out_a = np.empty((64, 2), dtype=np.float64)
    out_b = np.empty((64, 2), dtype=np.float64)
    g0 = int("".join(map(str, _G0_TAPS)), 2)
    g1 = int("".join(map(str, _G1_TAPS)), 2)
    for s in range(64):
        for u in (0, 1):
            reg = (u << 6) | s
            next_state[s, u] = (u << 5) | (s >> 1)
            out_a[s, u] = bin(reg & g0).count("1") & 1
            out_b[s, u] = bin(reg & g1).count("1") & 1
    return next_state, out_a, out_b


_NEXT_STATE, _OUT_A, _OUT_B = _transition_tables()

_LLR_CLIP = 1e3  # keeps path metrics well inside float64 precision


@njit(cache=True)
def _viterbi_kernel(llr, next_state, out_a, out_b):
    T = llr.shape[0]
    n_states = 64
    neg = -1e30
    pm = np.full(n_states, neg)
    pm[0] = 0.0
    new = np.empty(n_states)
    decisions = np.empty((T, n_states), dtype=np.uint8)
    for t in range(T):
        for i in range(n_states):
            new[i] = neg
        l0 = llr[t, 0]
        l1 = llr[t, 1]
        for s in range(n_states):
            m = pm[s]
            if m <= neg:
                continue
            for u in range(2):
                ns = next_state[s, u]
                metric = m + l0 * out_a[s, u] + l1 * out_b[s, u]
                if metric > new[ns]:
                    new[ns] = metric
                    decisions[t, ns] = (s << 1) | u
        for i in range(n_states):
            pm[i] = new[i]
    bits = np.empty(T, dtype=np.uint8)
    st = np.int64(0)  # traceback starts in the zero state enforced by the tail
    for t in range(T - 1, -1, -1):
        d = np.int64(decisions[t, st])
        bits[t] = d & 1
        st = d >> 1
    return bits


def viterbi_decode_soft(llrs: np.ndarray, rate: Fraction, n_info_bits: int) -> np.ndarray:
    """Maximum-likelihood decode of a punctured soft stream.

    llrs holds one value per transmitted coded bit (positive = bit 1); the
    trellis spans n_info_bits + 6 tail steps and the survivor ending in the
    zero state is traced back. Punctured positions enter as zero LLRs.
    """
    if rate not in _PUNCTURE:
        raise UnsupportedRate(f"rate {rate} not supported")
    llrs = np.asarray(llrs, dtype=np.float64)
    n_steps = n_info_bits + N_TAIL
    expected = punctured_length(rate, n_steps)
    if len(llrs) != expected:
        raise LengthMismatch(f"expected {expected} llrs for {n_info_bits} info bits, got {len(llrs)}")
    mother = np.zeros(2 * n_steps, dtype=np.float64)
    mother[_puncture_mask(rate, 2 * n_steps)] = np.clip(llrs, -_LLR_CLIP, _LLR_CLIP)
    bits = _viterbi_kernel(mother.reshape(-1, 2), _NEXT_STATE, _OUT_A, _OUT_B)
    return bits[:n_info_bits]


@lru_cache(maxsize=None)
def _interleave_permutation(n_cbps: int, n_bpsc: int) -> np.ndarray:
    """Position table: interleaved[perm[k]] = coded[k].

    Column count is 16 for the 48-subcarrier layout and 13 for the
    52-subcarrier layout; any other shape is rejected.
    """
    if n_cbps == 48 * n_bpsc:
        n_col = 16
    elif n_cbps == 52 * n_bpsc:
        n_col = 13
    else:
        raise LengthMismatch(f"n_cbps {n_cbps} does not match 48 or 52 carriers at {n_bpsc} bpsc")
    k = np.arange(n_cbps)
    i = (n_cbps // n_col) * (k % n_col) + k // n_col
    s = max(n_bpsc // 2, 1)
    j = s * (i // s) + (i + n_cbps - (n_col * i) // n_cbps) % s
    perm = np.asarray(j)
    assert np.array_equal(np.sort(perm), k)
    return perm


def interleave(bits: np.ndarray, n_cbps: int, n_bpsc: int) -> np.ndarray:
    """Two-permutation block interleaver applied per OFDM symbol."""
    bits = np.asarray(bits)
    if len(bits) % n_cbps:
        raise LengthMismatch("input is not a whole number of symbols")
    perm = _interleave_permutation(n_cbps, n_bpsc)
    blocks = bits.reshape(-1, n_cbps)
    out = np.empty_like(blocks)
    out[:, perm] = blocks
    return out.reshape(bits.shape)


def deinterleave_llr(llrs: np.ndarray, n_cbps: int, n_bpsc: int) -> np.ndarray:
    """Inverse of interleave, applied to soft values."""
    llrs = np.asarray(llrs)
    if len(llrs) % n_cbps:
        raise LengthMismatch("input is not a whole number of symbols")
    perm = _interleave_permutation(n_cbps, n_bpsc)
    return llrs.reshape(-1, n_cbps)[:, perm].reshape(llrs.shape)


def crc8(bits: np.ndarray) -> np.ndarray:
    """CRC-8 over a bit sequence: x^8 + x^2 + x + 1, all-ones init, complemented.

    Returns the 8 check bits in transmission order (c7 first).
    """
    reg = 0xFF
    for b in np.asarray(bits, dtype=np.uint8):
        fb = ((reg >> 7) & 1) ^ int(b)
        reg = ((reg << 1) & 0xFF) ^ (0x07 if fb else 0x00)
    reg ^= 0xFF
    return np.array([(reg >> (7 - i)) & 1 for i in range(8)], dtype=np.uint8)


def crc32(data: bytes) -> int:
    """IEEE 802.3 CRC-32 of an octet string."""
    return binascii.crc32(data) & 0xFFFFFFFF


def append_crc32(payload: bytes) -> bytes:
    return payload + crc32(payload).to_bytes(4, "little")


def check_crc32(psdu: bytes) -> bool:
    if len(psdu) < 4:
        return False
    return crc32(psdu[:-4]) == int.from_bytes(psdu[-4:], "little")
