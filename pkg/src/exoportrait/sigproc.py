"""EMG conditioning, heel-strike detection, stride segmentation and
phase-normalised averaging."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d

PHASE_POINTS = 101


class SignalTooShortError(ValueError):
    pass


class CoverageError(ValueError):
    """A stride extends beyond the span of the signal."""

    def __init__(self, index: int, start: float, end: float, span):
        self.index = index
        super().__init__(f"stride {index} [{start:.4f}, {end:.4f}] s outside signal span "
                         f"[{span[0]:.4f}, {span[1]:.4f}] s")


@dataclass(frozen=True)
class Stride:
    index: int
    start: float
    end: float
    leg: str = "right"

    @property
    def duration(self) -> float:
        return self.end - self.start


def emg_filter(fs: float, band=(5.0, 500.0), order: int = 4):
    """Butterworth band-pass in second-order sections.

    The upper edge is capped just below Nyquist so 1 kHz recordings remain
    usable.
    """
    hi = min(band[1], 0.49 * fs)
    return signal.butter(order, (band[0], hi), btype="bandpass", fs=fs, output="sos")


def process_emg(raw, fs: float = 2000.0, band=(5.0, 500.0), order: int = 4,
                window: float = 0.1) -> np.ndarray:
    """Envelope: zero-phase band-pass, full-wave rectification, centred moving average.

    Parameters
    ----------
    raw : (n,) or (n, channels) array
    fs : sample rate, Hz (at least 1000)
    window : moving-average length, s; rounded to an odd sample count so
        the average is centred.

    Returns
    -------
    Envelope with the shape of ``raw``.
    """
    if fs < 1000:
        raise ValueError(f"EMG sample rate must be at least 1000 Hz, got {fs}")
    x = np.asarray(raw, dtype=float)
    sos = emg_filter(fs, band, order)
    size = 2 * int(round(window * fs / 2)) + 1
    padlen = 3 * (2 * len(sos) + 1)
    if x.shape[0] < 3 * max(size, padlen):
        raise SignalTooShortError(
            f"EMG series of {x.shape[0]} samples is shorter than three warm-up lengths "
            f"({3 * max(size, padlen)} samples)")
    y = np.abs(signal.sosfiltfilt(sos, x, axis=0))
    return uniform_filter1d(y, size=size, axis=0, mode="reflect")


def normalize_mvc(envelope, mvc, channels: Optional[Sequence[str]] = None) -> np.ndarray:
    """Divide each channel by its maximum voluntary contraction."""
    env = np.asarray(envelope, dtype=float)
    mvc = np.atleast_1d(np.asarray(mvc, dtype=float))
    for c, m in enumerate(mvc):
        if not m > 0:
            name = channels[c] if channels is not None else str(c)
            raise ValueError(f"MVC of channel {name} must be positive, got {m}")
    return env / mvc


def mvc_from(envelopes) -> np.ndarray:
    """Per-channel maximum over a collection of envelopes (``(n_i, channels)`` each)."""
    return np.max(np.stack([np.max(np.asarray(e), axis=0) for e in envelopes]), axis=0)


def detect_heel_strikes(vgrf, fs: float = 1000.0, threshold: float = 30.0,
                        refractory: float = 0.3, t0: float = 0.0) -> np.ndarray:
    """Rising threshold crossings of one belt's vertical force, s.

    Crossing times are linearly interpolated between samples; an event
    closer than ``refractory`` to the previously accepted one is dropped.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    x = np.asarray(vgrf, dtype=float)
    if x.size < 2:
        return np.empty(0)
    idx = np.nonzero((x[:-1] < threshold) & (x[1:] >= threshold))[0]
    frac = (threshold - x[idx]) / (x[idx + 1] - x[idx])
    times = t0 + (idx + frac) / fs
    out = []
    for te in times:
        if not out or te - out[-1] >= refractory:
            out.append(te)
    return np.asarray(out)


def segment_strides(events: Sequence[float], leg: str = "right") -> list:
    """Strides between consecutive heel strikes of one leg."""
    ev = np.sort(np.asarray(events, dtype=float))
    return [Stride(i, float(a), float(b), leg) for i, (a, b) in enumerate(zip(ev[:-1], ev[1:]))]


def stride_samples(stride: Stride, points: int = PHASE_POINTS) -> np.ndarray:
    """Times of the phase grid ``linspace(0, 1, points)`` within ``stride``."""
    return stride.start + np.linspace(0.0, 1.0, points) * stride.duration


def resample_strides(values, t, strides: Sequence[Stride], points: int = PHASE_POINTS) -> np.ndarray:
    """Each stride linearly interpolated onto the phase grid: ``(strides, points[, channels])``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    span = (t[0], t[-1])
    out = []
    for k, s in enumerate(strides):
        if s.start < span[0] - 1e-9 or s.end > span[1] + 1e-9:
            raise CoverageError(getattr(s, "index", k), s.start, s.end, span)
        ts = stride_samples(s, points)
        if v.ndim == 1:
            out.append(np.interp(ts, t, v))
        else:
            out.append(np.stack([np.interp(ts, t, v[:, c]) for c in range(v.shape[1])], axis=1))
    return np.asarray(out)


def phase_average(values, t, strides: Sequence[Stride], points: int = PHASE_POINTS):
    """Mean and standard deviation of the stride-normalised profiles.

    Returns
    -------
    phi : (points,) grid ``linspace(0, 1, points)``
    mean, sd : (points[, channels]) pointwise over strides (population sd)
    """
    if len(strides) == 0:
        raise ValueError("phase averaging needs at least one stride")
    prof = resample_strides(values, t, strides, points)
    return np.linspace(0.0, 1.0, points), prof.mean(axis=0), prof.std(axis=0)
