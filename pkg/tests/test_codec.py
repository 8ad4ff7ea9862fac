"""Scrambler, convolutional code, interleaver, constellation, and CRC tests.

Derived expectations are computed by small independent oracles written here
(different construction than the library code) and by frozen hand-run values.
"""
from fractions import Fraction

import numpy as np
import pytest

from dot11phy import coding
from dot11phy.coding import (
    bcc_encode,
    bits_from_bytes,
    bytes_from_bits,
    crc8,
    crc32,
    deinterleave_llr,
    interleave,
    scramble,
    scrambler_sequence,
    seed_from_scrambled_service,
    viterbi_decode_soft,
)
from dot11phy.errors import LengthMismatch, NonPositiveNoiseVar, UnsupportedRate, ZeroSeed
from dot11phy.modulation import (
    BITS_PER_POINT,
    constellation_points,
    demap_llr,
    map_symbols,
)
from dot11phy.params import Modulation

RATES = (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4), Fraction(5, 6))

# Hand-run x^7 + x^4 + 1 register from seed 1011101 (x7..x1), 16 steps.
PN16_SEED_1011101 = [0, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1]

# Impulse response of the 133/171 encoder: pairs (A_t, B_t) for t = 0..6.
IMPULSE_RESPONSE_14 = [1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1]


def _llrs_for_bits(bits, amp=4.0):
    return amp * (2.0 * np.asarray(bits, dtype=float) - 1.0)


# --- scrambler -----------------------------------------------------------------

def test_scrambler_pn_matches_hand_run():
    assert list(scrambler_sequence(0b1011101, 16)) == PN16_SEED_1011101


def test_scramble_of_zeros_is_pn_sequence():
    out = scramble(np.zeros(16, dtype=np.uint8), 0b1011101)
    assert list(out) == PN16_SEED_1011101


def test_scramble_is_involution():
    rng = np.random.default_rng(0)
    for seed in (1, 0b1011101, 127, 64):
        bits = rng.integers(0, 2, 1000, dtype=np.uint8)
        assert np.array_equal(scramble(scramble(bits, seed), seed), bits)


def test_zero_seed_rejected():
    with pytest.raises(ZeroSeed):
        scramble(np.zeros(8, dtype=np.uint8), 0)


def test_seed_recovery_from_service_bits():
    for seed in (1, 45, 0b1011101, 127):
        scrambled = scramble(np.zeros(7, dtype=np.uint8), seed)
        assert seed_from_scrambled_service(scrambled) == seed


# --- convolutional code -----------------------------------------------------------

def test_bcc_zero_input():
    out = bcc_encode(np.zeros(6, dtype=np.uint8), Fraction(1, 2))
    assert len(out) == 12 and not out.any()


def test_bcc_impulse_response():
    bits = np.zeros(7, dtype=np.uint8)
    bits[0] = 1
    out = bcc_encode(bits, Fraction(1, 2))
    assert list(out) == IMPULSE_RESPONSE_14


def test_bcc_puncture_lengths():
    out = bcc_encode(np.zeros(6, dtype=np.uint8), Fraction(3, 4))
    assert len(out) == 8
    assert len(bcc_encode(np.zeros(6, dtype=np.uint8), Fraction(2, 3))) == 9
    assert len(bcc_encode(np.zeros(10, dtype=np.uint8), Fraction(5, 6))) == 12


def test_bcc_unsupported_rate():
    with pytest.raises(UnsupportedRate):
        bcc_encode(np.zeros(6, dtype=np.uint8), Fraction(1, 3))


def test_viterbi_noiseless_roundtrip_all_rates():
    rng = np.random.default_rng(1)
    for rate in RATES:
        for _ in range(8):
            info = rng.integers(0, 2, 240, dtype=np.uint8)
            tx = np.concatenate([info, np.zeros(6, dtype=np.uint8)])
            coded = bcc_encode(tx, rate)
            decoded = viterbi_decode_soft(_llrs_for_bits(coded), rate, len(info))
            assert np.array_equal(decoded, info), f"rate {rate}"


def test_viterbi_corrects_isolated_flips():
    rng = np.random.default_rng(2)
    info = rng.integers(0, 2, 1000, dtype=np.uint8)
    coded = bcc_encode(np.concatenate([info, np.zeros(6, dtype=np.uint8)]), Fraction(1, 2))
    llrs = _llrs_for_bits(coded)
    for pos in (100, 700, 1500):  # well separated
        llrs[pos] = -llrs[pos]
    assert np.array_equal(viterbi_decode_soft(llrs, Fraction(1, 2), 1000), info)


def test_viterbi_total_erasure_still_decodes_something():
    out = viterbi_decode_soft(np.zeros(2 * 56), Fraction(1, 2), 50)
    assert len(out) == 50


def test_viterbi_length_mismatch():
    with pytest.raises(LengthMismatch):
        viterbi_decode_soft(np.zeros(100), Fraction(1, 2), 50)


# --- interleaver -----------------------------------------------------------------

@pytest.mark.parametrize("n_bpsc", [1, 2, 4, 6, 8])
@pytest.mark.parametrize("n_sd", [48, 52])
def test_interleaver_roundtrip(n_sd, n_bpsc):
    n_cbps = n_sd * n_bpsc
    rng = np.random.default_rng(n_cbps)
    bits = rng.integers(0, 2, 3 * n_cbps, dtype=np.uint8)
    inter = interleave(bits, n_cbps, n_bpsc)
    assert np.array_equal(deinterleave_llr(inter, n_cbps, n_bpsc), bits)


def test_interleaver_is_bijection():
    perm = coding._interleave_permutation(48, 1)
    assert sorted(perm) == list(range(48))
    perm = coding._interleave_permutation(52 * 6, 6)
    assert sorted(perm) == list(range(312))


def test_interleaver_bit0_stays_at_0():
    # First permutation: i = 3*(0 % 16) + 0 = 0; second: s = 1 so j = i.
    bits = np.zeros(48, dtype=np.uint8)
    bits[0] = 1
    assert interleave(bits, 48, 1)[0] == 1


def test_interleaver_length_mismatch():
    with pytest.raises(LengthMismatch):
        interleave(np.zeros(47, dtype=np.uint8), 48, 1)


# --- constellations -----------------------------------------------------------------

def test_bpsk_mapping():
    pts = map_symbols(np.array([0, 1], dtype=np.uint8), Modulation.BPSK)
    assert pts[0] == pytest.approx(-1 + 0j)
    assert pts[1] == pytest.approx(1 + 0j)


def test_qbpsk_mapping():
    pts = map_symbols(np.array([0, 1], dtype=np.uint8), Modulation.QBPSK)
    assert pts[0] == pytest.approx(-1j)
    assert pts[1] == pytest.approx(1j)


@pytest.mark.parametrize("mod", list(Modulation))
def test_unit_average_energy(mod):
    pts = constellation_points(mod)
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_mapping_roundtrip_via_demap():
    rng = np.random.default_rng(3)
    for mod in Modulation:
        bits = rng.integers(0, 2, 24 * BITS_PER_POINT[mod], dtype=np.uint8)
        pts = map_symbols(bits, mod)
        hard = (demap_llr(pts, mod, 1e-3) > 0).astype(np.uint8)
        assert np.array_equal(hard, bits), mod


def test_bpsk_llr_convention():
    llr = demap_llr(np.array([1.0 + 0j]), Modulation.BPSK, 1.0)
    assert llr[0] == pytest.approx(4.0)
    assert llr[0] > 0  # positive selects bit 1


def test_qam16_outer_bit_magnitude():
    a = 1 / np.sqrt(10)
    outer = demap_llr(np.array([3 * a + 0j]), Modulation.QAM16, 1.0)
    inner = demap_llr(np.array([1 * a + 0j]), Modulation.QAM16, 1.0)
    assert abs(outer[0]) > abs(inner[0])


def test_demap_hard_decisions_are_nearest_neighbor():
    rng = np.random.default_rng(4)
    for mod in (Modulation.QPSK, Modulation.QAM16, Modulation.QAM64, Modulation.QAM256):
        pts = constellation_points(mod)
        bpp = BITS_PER_POINT[mod]
        labels = ((np.arange(len(pts))[:, None] >> np.arange(bpp - 1, -1, -1)) & 1)
        test = rng.normal(size=64) * 0.7 + 1j * rng.normal(size=64) * 0.7
        hard = (demap_llr(test, mod, 0.5) > 0).astype(int).reshape(-1, bpp)
        nearest = labels[np.argmin(np.abs(test[:, None] - pts[None, :]), axis=1)]
        assert np.array_equal(hard, nearest), mod


def test_demap_rejects_bad_noise_var():
    with pytest.raises(NonPositiveNoiseVar):
        demap_llr(np.array([1 + 0j]), Modulation.BPSK, 0.0)


# --- CRCs -----------------------------------------------------------------

def _crc32_bitwise(data: bytes) -> int:
    # Independent oracle: reflected bitwise CRC-32, poly 0xEDB88320.
    reg = 0xFFFFFFFF
    for byte in data:
        reg ^= byte
        for _ in range(8):
            reg = (reg >> 1) ^ (0xEDB88320 if reg & 1 else 0)
    return reg ^ 0xFFFFFFFF


def test_crc32_check_value():
    assert crc32(b"123456789") == 0xCBF43926


def test_crc32_matches_bitwise_oracle():
    rng = np.random.default_rng(5)
    for n in (0, 1, 17, 500):
        data = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
        assert crc32(data) == _crc32_bitwise(data)


def test_crc32_frame_self_check():
    payload = bytes(range(200))
    framed = coding.append_crc32(payload)
    assert coding.check_crc32(framed)


def test_crc32_detects_single_bit_flip():
    rng = np.random.default_rng(6)
    payload = rng.integers(0, 256, 500, dtype=np.uint8).tobytes()
    framed = bytearray(coding.append_crc32(payload))
    for _ in range(20):
        pos = rng.integers(0, len(framed))
        bit = 1 << rng.integers(0, 8)
        framed[pos] ^= bit
        assert not coding.check_crc32(bytes(framed))
        framed[pos] ^= bit


def _crc8_oracle(bits) -> list:
    # Long-division oracle over GF(2): remainder of x^8*(m(x) + ones) ...
    # implemented as the direct shift-register definition with complemented
    # initialization and output.
    reg = [1] * 8
    for b in bits:
        fb = reg[0] ^ int(b)
        reg = reg[1:] + [0]
        if fb:
            reg[5] ^= 1  # x^2
            reg[6] ^= 1  # x^1
            reg[7] ^= 1  # x^0
    return [r ^ 1 for r in reg]


def test_crc8_matches_oracle():
    rng = np.random.default_rng(7)
    for n in (8, 34, 64):
        bits = rng.integers(0, 2, n, dtype=np.uint8)
        assert list(crc8(bits)) == _crc8_oracle(bits)


def test_crc8_all_zero_input():
    # All-ones init complemented: known nontrivial value, stable across runs.
    assert list(crc8(np.zeros(34, dtype=np.uint8))) == _crc8_oracle([0] * 34)


# --- byte/bit packing --------------------------------------------------------------

def test_bits_bytes_roundtrip():
    rng = np.random.default_rng(8)
    data = rng.integers(0, 256, 64, dtype=np.uint8).tobytes()
    assert bytes_from_bits(bits_from_bytes(data)) == data


def test_bit_order_is_lsb_first():
    assert list(bits_from_bytes(b"\x01")) == [1, 0, 0, 0, 0, 0, 0, 0]
