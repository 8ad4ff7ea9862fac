"""Packet detection and synchronization front end.

Streaming autocorrelation at the short-symbol lag feeds a plateau trigger;
the long training field's lag-64 plateau gives fine timing via its 80%
shoulders, and the two CFO estimators run on the short and long fields.
Running sums are recomputed from scratch every WINDOW_REFRESH samples to
bound floating-point drift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoPlateau, OutOfBounds

STF_LAG = 16
LTF_LAG = 64
WINDOW_REFRESH = 4096

# Trigger defaults. The plateau height under noise is roughly snr/(1+snr), so
# a 0.5 threshold keeps low-MCS operating points detection-clean while the
# plateau-length requirement suppresses noise triggers.
DETECT_THRESHOLD = 0.5
MIN_PLATEAU = 32

# Fine-timing search window relative to the trigger index, wide enough to
# cover the L-LTF plateau for any trigger point inside the L-STF.
FINE_SEARCH = (80, 240)
FINE_MIN_RHO = 0.3
SHOULDER_SPAN = 96
SHOULDER_LEVEL = 0.8
# From the 80% left shoulder to the LTF start: 12.2 samples of slope up to
# the plateau edge, 16 to the plateau center (GI2 midpoint), 16 more to the
# first LTF sample; calibrated on clean frames.
LEFT_SHOULDER_TO_LTF = 44.2
GI2_CFO_BACKOFF = 16


@dataclass
class AutocorrStream:
    """Per-index autocorrelation products; arrays share one index axis."""
    rho: np.ndarray
    inner: np.ndarray
    power: np.ndarray


@dataclass
class SyncResult:
    ltf_start: int
    coarse_cfo: float
    fine_cfo: float

    @property
    def overall_cfo(self) -> float:
        return self.coarse_cfo + self.fine_cfo


def _windowed_sum(arr: np.ndarray, w: int) -> np.ndarray:
    """Sliding sums of width w, recomputed from scratch every WINDOW_REFRESH."""
    n_out = len(arr) - w + 1
    out = np.empty(n_out, dtype=arr.dtype)
    for start in range(0, n_out, WINDOW_REFRESH):
        stop = min(start + WINDOW_REFRESH, n_out)
        cs = np.cumsum(arr[start:stop + w - 1])
        out[start:stop] = cs[w - 1:] - np.concatenate((np.zeros(1, dtype=arr.dtype), cs[:-w]))
    return out


def autocorr_stream(samples: np.ndarray, lag: int = STF_LAG) -> AutocorrStream:
    """Normalized lag autocorrelation at every index.

    rho[n] compares the windows [n, n+lag) and [n+lag, n+2*lag); it is 1.0
    inside a field that repeats with the given period and 0 on silence.
    """
    x = np.asarray(samples)
    if len(x) < 2 * lag:
        raise OutOfBounds("stream shorter than two lags")
    n_out = len(x) - 2 * lag + 1
    inner = _windowed_sum(np.conj(x[:-lag]) * x[lag:], lag)[:n_out]
    pw = _windowed_sum(np.abs(x) ** 2, lag)
    denom = np.sqrt(pw[:n_out] * pw[lag:lag + n_out])
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(denom > 1e-30, np.abs(inner) / denom, 0.0)
    return AutocorrStream(rho=np.clip(rho, 0.0, 1.0), inner=inner, power=pw[:n_out])


def detect_trigger(rho: np.ndarray, threshold: float = DETECT_THRESHOLD,
                   min_plateau: int = MIN_PLATEAU, start: int = 0):
    """First index of a run of at least min_plateau samples with rho >= threshold.

    Returns None when no packet is present. Re-arming after a handled packet
    is the caller's job (single-consumer loop).
    """
    above = np.flatnonzero(rho[start:] >= threshold)
    if len(above) == 0:
        return None
    breaks = np.flatnonzero(np.diff(above) > 1)
    run_starts = np.concatenate(([0], breaks + 1))
    run_ends = np.concatenate((breaks, [len(above) - 1]))
    lengths = above[run_ends] - above[run_starts] + 1
    good = np.flatnonzero(lengths >= min_plateau)
    if len(good) == 0:
        return None
    return int(start + above[run_starts[good[0]]])


def coarse_cfo(samples: np.ndarray, trigger_index: int, segment: int = 3 * STF_LAG) -> float:
    """Coarse CFO (rad/sample) from the short-field repetition at the trigger."""
    x = np.asarray(samples)
    if trigger_index + segment + STF_LAG > len(x):
        raise OutOfBounds("coarse CFO window extends past the stream")
    a = x[trigger_index:trigger_index + segment]
    b = x[trigger_index + STF_LAG:trigger_index + STF_LAG + segment]
    return float(np.angle(np.vdot(a, b))) / STF_LAG


def _shoulder_crossing(rho: np.ndarray, peak: int, target: float, step: int) -> float:
    """Fractional index where rho falls through target walking from the peak.

    A crossing needs three consecutive samples below target so single noisy
    dips inside the plateau cannot stop the walk early; the crossing is then
    refined by a short least-squares line fit across the slope, which keeps
    the estimate steady under noise.
    """
    i = peak
    limit = SHOULDER_SPAN
    n = len(rho)
    while limit:
        j = i + step
        if j <= 0 or j >= n - 1:
            i = j
            break
        if rho[j] < target:
            j2 = min(max(j + step, 0), n - 1)
            j3 = min(max(j + 2 * step, 0), n - 1)
            if rho[j2] < target and rho[j3] < target:
                i = j
                break
        i = j
        limit -= 1
    i = min(max(i, 1), n - 2)
    w0, w1 = max(0, i - 4), min(n, i + 5)
    xs = np.arange(w0, w1)
    slope, intercept = np.polyfit(xs, rho[w0:w1], 1)
    if abs(slope) > 1e-6:
        fit = (target - intercept) / slope
        if abs(fit - i) <= 6:
            return float(fit)
    prev = i - step
    if rho[prev] == rho[i]:
        return float(i)
    return prev + step * (rho[prev] - target) / (rho[prev] - rho[i])


def fine_timing(samples: np.ndarray, search_window: tuple,
                min_rho: float = FINE_MIN_RHO) -> int:
    """Start index of the first long training symbol.

    Computes the lag-64 autocorrelation over the window, finds its maximum,
    and locates the shoulders where it falls to 80% of the maximum. The
    plateau center (the GI2 midpoint) is reconstructed from the left shoulder
    and the known plateau half-width: the left slope faces only training
    fields and is therefore payload-independent, while the right slope rides
    partly on the signal field and wanders with its content. Expects coarse
    CFO already compensated.
    """
    lo, hi = search_window
    x = np.asarray(samples)
    if hi + 2 * LTF_LAG > len(x):
        raise OutOfBounds("fine timing window extends past the stream")
    rho = autocorr_stream(x[lo:hi + 2 * LTF_LAG], lag=LTF_LAG).rho
    peak = int(np.argmax(rho))
    peak_val = rho[peak]
    if peak_val < min_rho:
        raise NoPlateau(f"max lag-64 autocorrelation {peak_val:.3f} below {min_rho}")
    target = SHOULDER_LEVEL * peak_val
    left = _shoulder_crossing(rho, peak, target, -1)
    n2 = lo + int(round(left + LEFT_SHOULDER_TO_LTF))
    if not lo <= n2 <= hi + 2 * LTF_LAG:
        raise NoPlateau("shoulder estimate outside the search window")
    return n2


def fine_cfo(samples: np.ndarray, ltf_start: int) -> float:
    """Residual CFO (rad/sample) from the two long training symbols."""
    x = np.asarray(samples)
    if ltf_start < 0 or ltf_start + 2 * LTF_LAG > len(x):
        raise OutOfBounds("fine CFO window extends past the stream")
    a = x[ltf_start:ltf_start + LTF_LAG]
    b = x[ltf_start + LTF_LAG:ltf_start + 2 * LTF_LAG]
    return float(np.angle(np.vdot(a, b))) / LTF_LAG


def compensate_cfo(samples: np.ndarray, eps: float, start_index: int = 0) -> np.ndarray:
    """y[n] = exp(-j n eps) r[n], with n counted from start_index."""
    x = np.asarray(samples)
    n = start_index + np.arange(len(x))
    return x * np.exp(-1j * eps * n)


def synchronize(samples: np.ndarray, trigger_index: int,
                search=FINE_SEARCH) -> SyncResult:
    """Coarse CFO, fine timing, fine CFO; returns the combined sync state.

    The long-field repetition r[n] = r[n+64] holds from the start of GI2, so
    the fine-CFO window is anchored 16 samples before the estimated LTF start;
    a few samples of late timing bias then cannot spill the correlation into
    the signal field.
    """
    x = np.asarray(samples)
    eps1 = coarse_cfo(x, trigger_index)
    seg_end = trigger_index + search[1] + 3 * LTF_LAG
    if seg_end > len(x):
        raise OutOfBounds("not enough samples past the trigger for synchronization")
    seg = compensate_cfo(x[trigger_index:seg_end], eps1, start_index=trigger_index)
    n2_rel = fine_timing(seg, search)
    eps2 = fine_cfo(seg, n2_rel - GI2_CFO_BACKOFF)
    return SyncResult(ltf_start=trigger_index + n2_rel,
                      coarse_cfo=eps1, fine_cfo=eps2)
