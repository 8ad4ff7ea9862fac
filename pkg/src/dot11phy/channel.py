"""Seedable impairment models: AWGN, CFO, MIMO FIR channels, indoor multipath.

Everything is a pure function of its inputs and the supplied Generator, so
trials are reproducible and embarrassingly parallel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .params import FFT_SIZE, SAMPLE_RATE


@dataclass(frozen=True)
class MimoChannelTaps:
    """Sample-spaced FIR per (rx, tx) pair; shape (n_rx, n_tx, n_taps)."""
    taps: np.ndarray
    seed: int | None = None

    @property
    def n_rx(self) -> int:
        return self.taps.shape[0]

    @property
    def n_tx(self) -> int:
        return self.taps.shape[1]

    @property
    def n_taps(self) -> int:
        return self.taps.shape[2]


def ideal_taps(n_rx: int = 1, n_tx: int = 1) -> MimoChannelTaps:
    """Identity routing: each receive antenna hears its own transmit antenna."""
    taps = np.zeros((n_rx, n_tx, 1), dtype=np.complex128)
    for i in range(min(n_rx, n_tx)):
        taps[i, i, 0] = 1.0
    return MimoChannelTaps(taps=taps)


def awgn(samples: np.ndarray, snr_db, signal_power_ref: float | None = None,
         rng: np.random.Generator | None = None) -> np.ndarray:
    """Add circular complex Gaussian noise at the requested SNR.

    signal_power_ref defaults to the measured mean power of the input; pass
    the occupied-frame power explicitly when the stream has idle padding.
    snr_db = None or +inf returns the input unchanged.
    """
    x = np.asarray(samples)
    if snr_db is None or np.isinf(snr_db):
        return x.copy()
    if signal_power_ref is None:
        signal_power_ref = float(np.mean(np.abs(x) ** 2))
    if signal_power_ref <= 0:
        raise ValueError("signal_power_ref must be > 0")
    rng = rng or np.random.default_rng()
    noise_var = signal_power_ref / 10.0 ** (snr_db / 10.0)
    scale = np.sqrt(noise_var / 2.0)
    noise = scale * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return x + noise


def apply_cfo(samples: np.ndarray, f_hz: float, sample_rate: float = SAMPLE_RATE,
              start_index: int = 0) -> np.ndarray:
    """Rotate by exp(j 2 pi f n / fs); inverse of itself with -f."""
    if abs(f_hz) >= sample_rate / 2:
        raise ValueError("CFO beyond half the sample rate is not meaningful here")
    x = np.asarray(samples)
    n = start_index + np.arange(x.shape[-1])
    return x * np.exp(2j * np.pi * f_hz * n / sample_rate)


def apply_mimo_fir(streams: np.ndarray, taps: MimoChannelTaps) -> np.ndarray:
    """Convolve every (rx, tx) pair and sum per receive antenna.

    streams is (n_tx, n) or (n,) for one antenna; output is
    (n_rx, n + n_taps - 1).
    """
    x = np.atleast_2d(np.asarray(streams))
    if x.shape[0] != taps.n_tx:
        raise DimensionMismatch(f"{x.shape[0]} streams vs {taps.n_tx} channel inputs")
    n_out = x.shape[1] + taps.n_taps - 1
    out = np.zeros((taps.n_rx, n_out), dtype=np.complex128)
    for j in range(taps.n_rx):
        for i in range(taps.n_tx):
            out[j] += np.convolve(x[i], taps.taps[j, i])
    return out


# Two sample-spaced taps at 0 and 50 ns with a 0.9 / 0.1 power split: an
# exponential-profile reduction of the indoor Model B shape with exactly 15 ns
# rms delay spread and 50 ns excess delay, unit expected power per pair.
MODEL_B_TAP_POWERS = np.array([0.9, 0.1])


def tgac_model_b_taps(seed=None, n_rx: int = 2, n_tx: int = 2,
                      rng: np.random.Generator | None = None) -> MimoChannelTaps:
    """Random indoor multipath realization, i.i.d. Rayleigh taps per pair.

    Quasi-static: draw once per packet. Same seed, same taps.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    shape = (n_rx, n_tx, len(MODEL_B_TAP_POWERS))
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    taps = h * np.sqrt(MODEL_B_TAP_POWERS)
    return MimoChannelTaps(taps=taps, seed=seed)


def frequency_response(taps: MimoChannelTaps, subcarriers) -> np.ndarray:
    """Per-subcarrier response H[k]; shape (n_k, n_rx, n_tx)."""
    k = np.asarray(subcarriers, dtype=np.float64)
    delays = np.arange(taps.n_taps)
    phases = np.exp(-2j * np.pi * np.outer(k, delays) / FFT_SIZE)  # (n_k, n_taps)
    return np.einsum("kl,ijl->kij", phases, taps.taps)
