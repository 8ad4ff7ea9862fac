"""Impairment models: AWGN calibration, CFO rotation, MIMO FIR, multipath taps."""
import numpy as np
import pytest

from dot11phy import channel as chan
from dot11phy.errors import DimensionMismatch
from dot11phy.framer import PhyConfig, assemble_packet
from dot11phy.params import HT_MAP, PhyFormat


def test_awgn_infinite_snr_is_identity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    assert np.array_equal(chan.awgn(x, None), x)
    assert np.array_equal(chan.awgn(x, np.inf), x)


def test_awgn_snr_calibration():
    rng = np.random.default_rng(1)
    n = 1_000_000
    x = np.exp(2j * np.pi * 0.05 * np.arange(n))  # unit-power tone
    for snr_db in (0.0, 10.0, 23.0):
        y = chan.awgn(x, snr_db, signal_power_ref=1.0, rng=np.random.default_rng(7))
        noise_power = np.mean(np.abs(y - x) ** 2)
        measured = 10 * np.log10(1.0 / noise_power)
        assert measured == pytest.approx(snr_db, abs=0.1)


def test_awgn_deterministic_with_seed():
    x = np.ones(4096, dtype=complex)
    a = chan.awgn(x, 10.0, rng=np.random.default_rng(42))
    b = chan.awgn(x, 10.0, rng=np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_apply_cfo_identity_and_phase():
    rng = np.random.default_rng(2)
    x = rng.normal(size=500) + 1j * rng.normal(size=500)
    assert np.array_equal(chan.apply_cfo(x, 0.0), x)
    y = chan.apply_cfo(np.ones(200, dtype=complex), 233e3)
    n = 123
    assert np.angle(y[n]) == pytest.approx(
        (2 * np.pi * 233e3 * n / 20e6 + np.pi) % (2 * np.pi) - np.pi, abs=1e-9)


def test_apply_cfo_inverse():
    rng = np.random.default_rng(3)
    x = rng.normal(size=300) + 1j * rng.normal(size=300)
    y = chan.apply_cfo(chan.apply_cfo(x, 150e3), -150e3)
    assert np.max(np.abs(y - x)) < 1e-12


def test_mimo_fir_identity_routing():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 400)) + 1j * rng.normal(size=(2, 400))
    out = chan.apply_mimo_fir(x, chan.ideal_taps(2, 2))
    assert np.allclose(out[:, :400], x)


def test_mimo_fir_zero_taps():
    taps = chan.MimoChannelTaps(taps=np.zeros((2, 2, 3), dtype=complex))
    out = chan.apply_mimo_fir(np.ones((2, 100)), taps)
    assert not out.any()


def test_mimo_fir_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        chan.apply_mimo_fir(np.ones((2, 10)), chan.ideal_taps(1, 1))


def test_csd_equivalent_channel_frequency_response():
    # Single-tap gains a and b with the -200 ns shift on antenna 2 combine to
    # a + b * exp(-j 2 pi k dF T2) on every subcarrier of the preamble.
    a, b = 0.8 + 0.3j, -0.4 + 0.9j
    taps = chan.MimoChannelTaps(taps=np.array([[[a], [b]]]))
    frame = assemble_packet(PhyConfig(format=PhyFormat.LEGACY, mcs=0,
                                      payload=bytes(50), n_tx=2))
    rx = chan.apply_mimo_fir(frame.samples, taps)[0]
    ltf1 = rx[192:256]
    spec = np.fft.fft(ltf1) * (np.sqrt(52) / 64)
    from dot11phy.framer import LTF_SEQUENCE
    k = np.array(sorted(LTF_SEQUENCE))
    vals = np.array([LTF_SEQUENCE[i] for i in sorted(LTF_SEQUENCE)])
    measured = spec[k % 64] / (vals / np.sqrt(2))
    expected = a + b * np.exp(-2j * np.pi * k * 312_500.0 * (-200e-9))
    assert np.max(np.abs(measured - expected)) < 1e-9


def test_model_b_taps_power_and_determinism():
    total = 0.0
    n = 10_000
    rng = np.random.default_rng(5)
    for _ in range(n):
        taps = chan.tgac_model_b_taps(rng=rng, n_rx=1, n_tx=1)
        total += np.sum(np.abs(taps.taps) ** 2)
    assert total / n == pytest.approx(1.0, rel=0.02)
    t1 = chan.tgac_model_b_taps(seed=9)
    t2 = chan.tgac_model_b_taps(seed=9)
    assert np.array_equal(t1.taps, t2.taps)


def test_model_b_rms_delay_spread():
    p = chan.MODEL_B_TAP_POWERS
    delays_ns = 50.0 * np.arange(len(p))
    mean = np.sum(p * delays_ns) / np.sum(p)
    rms = np.sqrt(np.sum(p * (delays_ns - mean) ** 2) / np.sum(p))
    assert rms == pytest.approx(15.0, abs=0.5)
    assert delays_ns[-1] <= 80.0


def test_model_b_is_frequency_selective():
    rng = np.random.default_rng(6)
    ratios = []
    for _ in range(50):
        taps = chan.tgac_model_b_taps(rng=rng, n_rx=1, n_tx=1)
        h = chan.frequency_response(taps, np.array(HT_MAP.active_indices))[:, 0, 0]
        ratios.append(np.max(np.abs(h)) / max(np.min(np.abs(h)), 1e-12))
    assert np.median(ratios) > 1.05


def test_fir_matches_per_subcarrier_multiplication():
    # Time-domain convolution against the tap FFT on an OFDM symbol interior,
    # for channels no longer than the guard interval.
    rng = np.random.default_rng(7)
    frame = assemble_packet(PhyConfig(format=PhyFormat.LEGACY, mcs=2, payload=bytes(120)))
    taps = np.zeros((1, 1, 16), dtype=complex)
    taps[0, 0, :5] = (rng.normal(size=5) + 1j * rng.normal(size=5)) * [1, .5, .3, .2, .1]
    ch = chan.MimoChannelTaps(taps=taps)
    rx = chan.apply_mimo_fir(frame.samples, ch)[0]
    h = chan.frequency_response(ch, np.arange(64))[:, 0, 0]
    data_start = frame.offsets["data"]
    for sym in range(3):
        tx_win = frame.samples[0][data_start + 80 * sym + 16:][:64]
        rx_win = rx[data_start + 80 * sym + 16:][:64]
        tx_spec = np.fft.fft(tx_win)
        rx_spec = np.fft.fft(rx_win)
        active = np.abs(tx_spec) > 1e-9
        assert np.max(np.abs(rx_spec[active] - h[active] * tx_spec[active])) < 1e-6
