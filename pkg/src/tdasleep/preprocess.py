"""Airflow conditioning, breath detection and instantaneous respiratory rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import EmptyBreathsError

LOWPASS_HZ = 2.0
FILTER_ORDER = 4
IRR_RATE_HZ = 4.0
REFRACTORY_S = 1.0
HYSTERESIS_IQR_FRACTION = 0.1


def detrend_lowpass(x, rate_hz: float, cutoff_hz: float = LOWPASS_HZ,
                    order: int = FILTER_ORDER) -> np.ndarray:
    """Remove the least-squares line, then low-pass with a zero-phase Butterworth.

    The filter is applied forward and backward (second-order sections), so
    the effective magnitude response is the square of the designed one.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 8:
        raise ValueError("need at least 8 samples")
    y = sps.detrend(x, type="linear")
    if cutoff_hz >= rate_hz / 2:
        return y
    sos = sps.butter(order, cutoff_hz, btype="low", fs=rate_hz, output="sos")
    # pad by a few cutoff periods so the edge transient stays local; the
    # default padding is far shorter than the impulse response at high rates
    padlen = min(len(y) - 1, int(math.ceil(8 * rate_hz / cutoff_hz)))
    y = sps.sosfiltfilt(sos, y, padlen=padlen)
    # what is left of the transient would otherwise tilt the output slightly
    return sps.detrend(y, type="linear")


@dataclass(frozen=True)
class BreathSequence:
    """Detected breathing cycles; cycle ``i`` spans ``onsets_s[i] .. onsets_s[i+1]``."""

    onsets_s: np.ndarray
    peaks_s: np.ndarray
    troughs_s: np.ndarray
    peak_value: np.ndarray
    trough_value: np.ndarray
    inhale_area: np.ndarray
    exhale_area: np.ndarray

    @property
    def width_s(self) -> np.ndarray:
        return np.diff(self.onsets_s)

    @property
    def amplitude(self) -> np.ndarray:
        return self.peak_value - self.trough_value

    def __len__(self):
        return len(self.onsets_s) - 1


def _onset_candidates(x: np.ndarray, band: float) -> np.ndarray:
    """Fractional sample positions of hysteresis-qualified upward zero crossings."""
    lo = x < -band
    hi = x > band
    marks = np.flatnonzero(lo | hi)
    if marks.size < 2:
        return np.zeros(0)
    is_hi = hi[marks]
    rise = np.flatnonzero(is_hi[1:] & ~is_hi[:-1]) + 1
    if rise.size == 0:
        return np.zeros(0)
    ups = np.flatnonzero((x[:-1] <= 0) & (x[1:] > 0))
    # last zero up-crossing strictly before the sample that cleared +band
    k = np.searchsorted(ups, marks[rise], side="left") - 1
    j = ups[k]
    return j + (-x[j]) / (x[j + 1] - x[j])


def detect_breaths(x, rate_hz: float) -> BreathSequence:
    """Breath onsets as upward zero crossings of a detrended, filtered signal.

    A crossing counts only after the signal has gone below ``-h`` and is then
    confirmed by rising above ``+h``, with ``h = 0.1 * IQR(x)``. Onsets closer
    than 1 s to the previous accepted onset are dropped. Per cycle, the peak
    and trough are the extreme samples; inhale/exhale areas are the integrals
    of the positive and negative parts of the signal over the cycle.
    """
    x = np.asarray(x, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    band = HYSTERESIS_IQR_FRACTION * (q75 - q25)
    cand = _onset_candidates(x, band) if band > 0 else np.zeros(0)
    min_gap = REFRACTORY_S * rate_hz
    onsets = []
    for c in cand.tolist():
        if not onsets or c - onsets[-1] >= min_gap:
            onsets.append(c)
    if len(onsets) < 2:
        raise EmptyBreathsError(f"found {len(onsets)} breath onset(s); need 2")
    onsets = np.asarray(onsets)
    n_cyc = len(onsets) - 1
    peaks_i = np.empty(n_cyc, dtype=np.int64)
    troughs_i = np.empty(n_cyc, dtype=np.int64)
    inhale = np.empty(n_cyc)
    exhale = np.empty(n_cyc)
    dt = 1.0 / rate_hz
    for i in range(n_cyc):
        a = int(math.ceil(onsets[i]))
        b = int(math.ceil(onsets[i + 1]))
        seg = x[a:b]
        peaks_i[i] = a + int(np.argmax(seg))
        troughs_i[i] = a + int(np.argmin(seg))
        inhale[i] = np.sum(np.maximum(seg, 0.0)) * dt
        exhale[i] = np.sum(np.maximum(-seg, 0.0)) * dt
    return BreathSequence(
        onsets_s=onsets / rate_hz,
        peaks_s=peaks_i / rate_hz,
        troughs_s=troughs_i / rate_hz,
        peak_value=x[peaks_i],
        trough_value=x[troughs_i],
        inhale_area=inhale,
        exhale_area=exhale,
    )


def fritsch_carlson_slopes(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot derivatives for a monotone piecewise cubic Hermite interpolant."""
    n = len(t)
    if n < 2:
        return np.zeros(n)
    h = np.diff(t)
    delta = np.diff(y) / h
    m = np.empty(n)
    m[0], m[-1] = delta[0], delta[-1]
    m[1:-1] = 0.5 * (delta[:-1] + delta[1:])
    m[1:-1][delta[:-1] * delta[1:] <= 0] = 0.0
    for k in range(n - 1):
        if delta[k] == 0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / delta[k], m[k + 1] / delta[k]
        if a < 0:
            m[k], a = 0.0, 0.0
        if b < 0:
            m[k + 1], b = 0.0, 0.0
        r = math.hypot(a, b)
        if r > 3:
            tau = 3.0 / r
            m[k] = tau * a * delta[k]
            m[k + 1] = tau * b * delta[k]
    return m


def monotone_cubic(t, y, x) -> np.ndarray:
    """Evaluate the Fritsch-Carlson interpolant at ``x``; constant outside the knots."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(t) == 1:
        return np.full_like(x, y[0])
    m = fritsch_carlson_slopes(t, y)
    xc = np.clip(x, t[0], t[-1])
    k = np.clip(np.searchsorted(t, xc, side="right") - 1, 0, len(t) - 2)
    h = t[k + 1] - t[k]
    s = (xc - t[k]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y[k] + h10 * h * m[k] + h01 * y[k + 1] + h11 * h * m[k + 1]


def irr(breaths: BreathSequence, duration_s: float, rate_hz: float = IRR_RATE_HZ,
        placement: str = "end") -> np.ndarray:
    """Instantaneous respiratory rate (breaths/min) sampled on a uniform grid.

    Knot values are ``60 / width`` per cycle. With ``placement="end"`` each
    knot sits at the onset that closes its cycle (the rate becomes known
    there); ``"start"`` places it at the opening onset. Interpolation is
    monotone cubic, held constant beyond the first and last knots.
    """
    onsets = np.asarray(breaths.onsets_s, dtype=float)
    if len(onsets) < 2:
        raise EmptyBreathsError("need at least 2 onsets")
    rates = 60.0 / np.diff(onsets)
    if placement == "end":
        knots = onsets[1:]
    elif placement == "start":
        knots = onsets[:-1]
    else:
        raise ValueError(f"unknown knot placement {placement!r}")
    grid = np.arange(int(math.ceil(duration_s * rate_hz - 1e-9))) / rate_hz
    return monotone_cubic(knots, rates, grid)
