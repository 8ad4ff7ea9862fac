"""Correlation traces over clean frames: the cross- vs auto-correlation
behavior of the training fields for SISO and CSD transmissions, emitted as
plain (index, value) series for external plotting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .framer import TxFrame, legacy_ltf_symbol, legacy_stf_short_symbol
from .sync import autocorr_stream

TRACE_MODES = ("cc_stf", "ac_stf", "cc_ltf", "ac_ltf")


@dataclass
class TraceSeries:
    mode: str
    indices: np.ndarray
    values: np.ndarray  # normalized correlation, always in [0, 1]


def _cross_correlate(samples: np.ndarray, template: np.ndarray) -> np.ndarray:
    n = len(template)
    windows = np.lib.stride_tricks.sliding_window_view(samples, n)
    inner = np.abs(windows @ np.conj(template))
    norms = np.sqrt(np.sum(np.abs(windows) ** 2, axis=1)) * np.linalg.norm(template)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(norms > 1e-30, inner / norms, 0.0)
    return np.clip(rho, 0.0, 1.0)


def correlation_trace(frame: TxFrame, mode: str) -> TraceSeries:
    """Correlation series over a clean frame as seen by one receive antenna.

    The receive signal is the sum of the transmit antennas through an
    identity channel, which is what makes the CSD peak-splitting visible.
    """
    if mode not in TRACE_MODES:
        raise ValueError(f"mode must be one of {TRACE_MODES}")
    rx = frame.samples.sum(axis=0)
    if mode == "cc_stf":
        values = _cross_correlate(rx, legacy_stf_short_symbol())
    elif mode == "cc_ltf":
        values = _cross_correlate(rx, legacy_ltf_symbol())
    elif mode == "ac_stf":
        values = autocorr_stream(rx, lag=16).rho
    else:
        values = autocorr_stream(rx, lag=64).rho
    return TraceSeries(mode=mode, indices=np.arange(len(values)), values=values)


def trace_to_csv(trace: TraceSeries, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,value\n")
        for i, v in zip(trace.indices, trace.values):
            fh.write(f"{i},{v:.6f}\n")
