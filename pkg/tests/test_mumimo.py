"""Sounding, CSI feedback, ZF weight computation, and precoded MU downlink."""
import numpy as np
import pytest

from dot11phy.channel import MimoChannelTaps, apply_mimo_fir, ideal_taps
from dot11phy.errors import NotAnNdp, SoundingFailed
from dot11phy.framer import PhyConfig, assemble_packet
from dot11phy.mumimo import (
    CsiReport,
    Station,
    compute_zf_weights,
    leakage_db,
    measure_ndp_channel,
    run_mu_transmission,
    run_sounding_session,
)
from dot11phy.params import HT_MAP, PhyFormat

ACT = np.array(HT_MAP.active_indices)


def _flat_taps(rng) -> MimoChannelTaps:
    h = (rng.standard_normal((2, 2, 1)) + 1j * rng.standard_normal((2, 2, 1))) / np.sqrt(2)
    return MimoChannelTaps(taps=h)


def _capture(frame_samples, taps, station, pad=250):
    stream = apply_mimo_fir(frame_samples, taps)[station]
    return np.concatenate([np.zeros(pad, dtype=complex), stream,
                           np.zeros(pad, dtype=complex)])


def test_measure_ndp_identity_channel_convention():
    # Identity routing to a single-antenna station: the report carries the
    # antenna-1 path with the antenna-2 cyclic shift folded in as zero (no
    # second path reaches this station).
    ndp = assemble_packet(PhyConfig(format=PhyFormat.VHT_NDP))
    rep = measure_ndp_channel(_capture(ndp.samples, ideal_taps(2, 2), 0))
    mags = np.abs(rep.h)
    assert np.allclose(mags[:, 0], 1 / np.sqrt(2), atol=1e-6)
    assert np.allclose(mags[:, 1], 0.0, atol=1e-9)


def test_measure_ndp_recovers_flat_channel():
    rng = np.random.default_rng(0)
    taps = _flat_taps(rng)
    ndp = assemble_packet(PhyConfig(format=PhyFormat.VHT_NDP))
    rep = measure_ndp_channel(_capture(ndp.samples, taps, 0))
    # CSD folded into the reported CSI, a common timing ramp allowed.
    ramp2 = np.exp(-2j * np.pi * ACT * 312_500.0 * (-400e-9))
    expected = np.stack([np.full(56, taps.taps[0, 0, 0]),
                         taps.taps[0, 1, 0] * ramp2], axis=1) / np.sqrt(2)
    ratio = rep.h / expected
    common = ratio[:, 0]
    assert np.max(np.abs(ratio[:, 1] - common)) < 1e-6
    assert np.allclose(np.abs(common), 1.0, atol=1e-6)


def test_measure_ndp_rejects_data_frame():
    frame = assemble_packet(PhyConfig(format=PhyFormat.VHT_SU, mcs=0, payload=bytes(60)))
    cap = np.concatenate([np.zeros(250, dtype=complex), frame.samples[0],
                          np.zeros(250, dtype=complex)])
    with pytest.raises(NotAnNdp):
        measure_ndp_channel(cap)


def test_zf_weights_unit_vector_example():
    h1 = np.tile(np.array([0.5 + 0.1j, -0.2 + 0.7j]), (56, 1))
    h2 = np.tile(np.array([1.0 + 0j, 0.0 + 0j]), (56, 1))
    q = compute_zf_weights(CsiReport(0, h1, 0), CsiReport(1, h2, 0)).q
    # Station 2's channel is [1, 0]: the station-1 column must be [0, 1].
    assert np.allclose(q[:, 0, 0], 0.0, atol=1e-12)
    assert np.allclose(np.abs(q[:, 1, 0]), 1.0, atol=1e-12)


def test_zf_weights_orthogonality_and_norms():
    rng = np.random.default_rng(1)
    h1 = rng.normal(size=(56, 2)) + 1j * rng.normal(size=(56, 2))
    h2 = rng.normal(size=(56, 2)) + 1j * rng.normal(size=(56, 2))
    sm = compute_zf_weights(CsiReport(0, h1, 0), CsiReport(1, h2, 0))
    assert np.max(np.abs(np.einsum("ki,ki->k", h2, sm.q[:, :, 0]))) < 1e-12
    assert np.max(np.abs(np.einsum("ki,ki->k", h1, sm.q[:, :, 1]))) < 1e-12
    assert np.max(np.abs(np.linalg.norm(sm.q, axis=1) - 1.0)) < 1e-12


def test_zf_weights_degenerate_subcarrier_flagged():
    rng = np.random.default_rng(2)
    h1 = rng.normal(size=(56, 2)) + 1j * rng.normal(size=(56, 2))
    h2 = rng.normal(size=(56, 2)) + 1j * rng.normal(size=(56, 2))
    h2[13] = 0.0
    sm = compute_zf_weights(CsiReport(0, h1, 0), CsiReport(1, h2, 0))
    assert sm.degenerate[13]
    assert np.all(sm.q[13, :, 0] == 0)


def test_identical_user_channels_leak_completely():
    rng = np.random.default_rng(3)
    h = rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1))
    taps = MimoChannelTaps(taps=np.stack([h, h]))  # both stations see the same rows
    csi = np.tile(h[:, 0], (56, 1))
    sm = compute_zf_weights(CsiReport(0, csi, 0), CsiReport(1, csi, 0))
    # Columns are parallel and the beams null the users they serve.
    cross = np.abs(np.einsum("ki,ki->k", sm.q[:, :, 0], np.conj(sm.q[:, :, 1])))
    assert np.min(cross) > 1 - 1e-9
    leak = leakage_db(taps, sm)
    assert np.min(leak) > -3.0  # leakage comparable to signal


def test_sounding_session_end_to_end():
    rng = np.random.default_rng(4)
    taps = _flat_taps(rng)
    res = run_sounding_session(17, Station(0), Station(1, feedback_delay_s=1e-3),
                               taps, snr_db=None, rng=rng)
    assert res.sequence == 17
    assert res.reports[0].sequence == res.reports[1].sequence == 17
    assert res.feedback_times_s == (0.0, 1e-3)
    for i, rep in enumerate(res.reports):
        other = res.reports[1 - i].h
        col = res.steering.q[:, :, 1 - i]
        assert np.max(np.abs(np.einsum("ki,ki->k", rep.h, col))) < 1e-9


def test_sounding_fails_on_dead_channel():
    taps = MimoChannelTaps(taps=np.zeros((2, 2, 1), dtype=complex))
    with pytest.raises(SoundingFailed):
        run_sounding_session(0, Station(0), Station(1), taps, snr_db=None,
                             rng=np.random.default_rng(0))


def test_mu_transmission_exact_zf_noiseless():
    rng = np.random.default_rng(5)
    taps = _flat_taps(rng)
    res = run_sounding_session(0, Station(0), Station(1), taps, snr_db=None, rng=rng)
    p1 = rng.integers(0, 256, 120, dtype=np.uint8).tobytes()
    p2 = rng.integers(0, 256, 90, dtype=np.uint8).tobytes()
    pkt1, pkt2, leak = run_mu_transmission(p1, p2, res.steering, taps, None,
                                           mcs1=8, mcs2=3, rng=rng)
    assert pkt1.crc_ok and pkt1.payload == p1 and pkt1.mcs == 8
    assert pkt2.crc_ok and pkt2.payload == p2 and pkt2.mcs == 3
    assert np.max(leak) < -80.0


def test_mu_csi_error_raises_leakage_floor():
    rng = np.random.default_rng(6)
    taps = _flat_taps(rng)
    clean = run_sounding_session(0, Station(0), Station(1), taps, snr_db=None,
                                 rng=np.random.default_rng(1))
    noisy = run_sounding_session(0, Station(0), Station(1), taps, snr_db=None,
                                 csi_error_std=0.1, rng=np.random.default_rng(1))
    leak_clean = leakage_db(taps, clean.steering)
    leak_noisy = leakage_db(taps, noisy.steering)
    assert np.max(leak_clean) < -80.0
    assert np.min(leak_noisy) > -40.0


def test_mu_station_decode_matches_siso_over_equivalent_channel():
    # With perfect CSI and a static flat channel, station 1's decode equals a
    # single-stream transmission over its scalar equivalent channel with the
    # same noise realization.
    rng = np.random.default_rng(7)
    taps = _flat_taps(rng)
    res = run_sounding_session(0, Station(0), Station(1), taps, snr_db=None,
                               rng=np.random.default_rng(2))
    payload = rng.integers(0, 256, 150, dtype=np.uint8).tobytes()

    from dot11phy.framer import MuUser
    cfg = PhyConfig(format=PhyFormat.VHT_MU,
                    mu_users=(MuUser(4, payload), MuUser(4, payload[::-1])))
    frame = assemble_packet(cfg, steering=res.steering.q)
    rx1 = apply_mimo_fir(frame.samples, taps)[0]

    # Equivalent scalar channel for station 1 on every active subcarrier.
    from dot11phy.params import HT_CSD_NS, csd_samples
    g = np.stack([taps.taps[0, t, 0]
                  * np.exp(-2j * np.pi * ACT * csd_samples(HT_CSD_NS[t]) / 64)
                  for t in range(2)], axis=1)
    h_equiv = np.einsum("ki,ki->k", g, res.steering.q[:, :, 0])
    # Exact nulling means the other user contributes nothing at station 1.
    leak_power = np.abs(np.einsum("ki,ki->k", g, res.steering.q[:, :, 1]))
    assert np.max(leak_power) < 1e-10

    from dot11phy.receiver import receive
    pad = np.zeros(250, dtype=complex)
    pkts = receive(np.concatenate([pad, rx1, pad]), max_packets=1)
    assert pkts and pkts[0].crc_ok and pkts[0].payload == payload
    est = pkts[0].diagnostics.channel.h
    ratio = est / (h_equiv / np.sqrt(2))
    assert np.max(np.abs(np.abs(ratio) - 1.0)) < 1e-6
