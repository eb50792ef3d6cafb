"""Synthetic EMG, ground reaction force and breath-by-breath VO2 streams.

All generators are deterministic given their seed.  Each draws from its own
``numpy`` generator keyed on ``(seed, stream)`` so adding or removing one
stream never changes another.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal

from ..tables import read_table
from .human import STANCE

EMG_RATE = 2000
GRF_RATE = 1000
GRF_CHANNELS = ("vertical_right", "lateral_right", "longitudinal_right",
                "vertical_left", "lateral_left", "longitudinal_left")

_EMG_STREAM = 1
_GRF_STREAM = 2
_BREATH_STREAM = 3


@dataclass(frozen=True)
class MuscleMap:
    """Torque-to-muscle distribution for one leg (applied to both legs).

    ``matrix[m]`` weights the four joint drives ``[hip flexion, hip extension,
    knee flexion, knee extension]`` (each the positive part of the wearer
    torque in that direction) for muscle ``m``.  An activation of 1 needs a
    drive of ``torque_ref`` N*m.  Activity is modulated along the leg's own
    phase by ``1 + depth * cos(2 pi (phi - centre))``.
    """

    muscles: tuple
    names: tuple
    pcsa: np.ndarray
    matrix: np.ndarray
    centre: np.ndarray
    depth: np.ndarray
    torque_ref: float = 30.0

    @property
    def channels(self) -> list:
        return [f"{m}_{leg}" for leg in ("right", "left") for m in self.muscles]

    @property
    def weights(self) -> np.ndarray:
        """PCSA weight of every channel (both legs)."""
        return np.concatenate([self.pcsa, self.pcsa])

    @classmethod
    def load(cls, path) -> "MuscleMap":
        tab = read_table(path)
        f = tab.frame
        return cls(tuple(f["muscle"]), tuple(f["name"]), f["pcsa"].to_numpy(float),
                   f[["hip_flex", "hip_ext", "knee_flex", "knee_ext"]].to_numpy(float),
                   f["phase_centre"].to_numpy(float), f["phase_depth"].to_numpy(float),
                   float(tab.meta.get("torque_ref", 30.0)))


def default_muscle_map_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "muscles.csv"


@lru_cache(maxsize=None)
def default_muscle_map() -> MuscleMap:
    return MuscleMap.load(default_muscle_map_path())


def muscle_activation(u_H, phi, muscles: Optional[MuscleMap] = None) -> np.ndarray:
    """Activation ``(n, 14)`` of every channel from wearer torques ``(n, 4)``.

    ``phi`` is the right-leg phase (cycles, wrapped or not).  Linear in the
    torque magnitude for a fixed sign pattern.
    """
    mm = muscles or default_muscle_map()
    u = np.atleast_2d(np.asarray(u_H, dtype=float))
    phi = np.asarray(phi, dtype=float).reshape(-1)
    out = []
    for leg in range(2):
        hip, knee = u[:, 2 * leg], u[:, 2 * leg + 1]
        # knee flexion is the negative direction
        drives = np.stack([np.maximum(hip, 0), np.maximum(-hip, 0),
                           np.maximum(-knee, 0), np.maximum(knee, 0)], axis=1)
        act = drives @ mm.matrix.T / mm.torque_ref
        ph = phi[:, None] - 0.5 * leg
        act *= 1.0 + mm.depth * np.cos(2 * math.pi * (ph - mm.centre))
        out.append(act)
    return np.concatenate(out, axis=1)


def band_noise(rng: np.random.Generator, n: int, channels: int, band=(20.0, 450.0),
               rate: float = EMG_RATE) -> np.ndarray:
    """Unit-RMS Gaussian noise band-limited by a 4th-order Butterworth."""
    sos = signal.butter(4, band, btype="bandpass", fs=rate, output="sos")
    white = rng.standard_normal((n, channels))
    x = signal.sosfilt(sos, white, axis=0)
    return x / np.sqrt(np.mean(x * x, axis=0))


def synth_emg(u_H, phi, seed: int, t=None, rate: int = EMG_RATE,
              muscles: Optional[MuscleMap] = None, noise_rms: float = 0.003,
              duration: Optional[float] = None):
    """Raw 14-channel EMG (mV) from wearer torques sampled at the control rate.

    Parameters
    ----------
    u_H : (n, 4) wearer joint torques, N*m.
    phi : (n,) right-leg wearer phase, cycles.
    seed : int
    t : (n,) sample times of ``u_H``; default ``k / 200``.
    rate : EMG sample rate, Hz.
    noise_rms : electrode noise, in units of the full-activation carrier RMS.
    duration : stream length, s; default the span of ``t`` plus one control tick.

    Returns
    -------
    t_emg : (N,) s
    emg : (N, 14) mV
    """
    u_H = np.asarray(u_H, dtype=float)
    n = len(u_H)
    t = np.arange(n) / 200.0 if t is None else np.asarray(t, dtype=float)
    if duration is None:
        duration = t[-1] + (t[1] - t[0] if n > 1 else 0.005)
    N = int(round(duration * rate))
    t_emg = np.arange(N) / rate
    act = muscle_activation(u_H, phi, muscles)
    act_emg = np.empty((N, act.shape[1]))
    for c in range(act.shape[1]):
        act_emg[:, c] = np.interp(t_emg, t, act[:, c])
    rng = np.random.default_rng([seed, _EMG_STREAM])
    carrier = band_noise(rng, N, act.shape[1], rate=rate)
    floor = band_noise(rng, N, act.shape[1], rate=rate)
    return t_emg, act_emg * carrier + noise_rms * floor


def vertical_template(x) -> np.ndarray:
    """Double-bump vertical force over stance fraction ``x`` in body weights.

    Peaks of about 1.1 near 28% and 72% of stance with a 0.84 mid-stance
    valley; zero outside ``[0, 1)``.
    """
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x < 1)
    f = 1.24 * (np.sin(math.pi * x) + 0.25 * np.sin(3 * math.pi * x))
    return np.where(inside, f, 0.0)


def synth_grf(phase, t, seed: int, body_weight: float, duration: Optional[float] = None,
              rate: int = GRF_RATE, noise: float = 1.0, stride_jitter: float = 0.03):
    """Per-belt vertical, lateral and longitudinal GRF (N).

    ``phase`` is the unwrapped right-leg wearer phase at times ``t`` (the
    left leg trails by half a stride).  Each stance gets its own seeded
    amplitude jitter; white sensor noise of ``noise`` N is added.
    """
    phase = np.asarray(phase, dtype=float)
    t = np.asarray(t, dtype=float)
    if duration is None:
        duration = t[-1] + (t[1] - t[0] if len(t) > 1 else 0.005)
    N = int(round(duration * rate))
    t_grf = np.arange(N) / rate
    ph = np.interp(t_grf, t, phase)
    rng = np.random.default_rng([seed, _GRF_STREAM])
    n_strides = int(np.floor(ph.max())) + 3
    jitter = 1.0 + stride_jitter * rng.standard_normal((2, n_strides, 2))
    out = np.empty((N, 6))
    for leg in range(2):
        u = ph - 0.5 * leg
        stride = np.floor(u).astype(int) + 1  # +1 keeps the left leg's first index >= 0
        x = (u - np.floor(u)) / STANCE
        j = jitter[leg, np.clip(stride, 0, n_strides - 1)]
        # first and second peak scale smoothly across the valley
        w = np.clip(x, 0, 1)
        amp = j[:, 0] * (1 - w) + j[:, 1] * w
        fz = body_weight * vertical_template(x) * amp
        inside = (x >= 0) & (x < 1)
        lateral = np.where(inside, 0.06 * body_weight * np.sin(math.pi * x), 0.0)
        longi = np.where(inside, -0.18 * body_weight * np.sin(2 * math.pi * x), 0.0)
        out[:, 3 * leg] = fz
        out[:, 3 * leg + 1] = lateral * (1 if leg == 0 else -1)
        out[:, 3 * leg + 2] = longi
    out += noise * rng.standard_normal(out.shape)
    return t_grf, out


def baseline_vo2(v: float) -> float:
    """Resting-plus-walking VO2 without added muscular work, ml/kg/min."""
    return 6.0 + 9.0 * v


def synth_breaths(u_H, t, speed, seed: int, gain: float = 0.01, noise: float = 0.3,
                  spacing=(3.0, 5.0), dt: float = 0.005):
    """Breath-by-breath VO2 ``baseline(v) + gain * mean(u_H^2) + noise``.

    Parameters
    ----------
    u_H : (n, 4) wearer torques at the control rate.
    t : (n,) control sample times, s.
    speed : (n,) belt speed at each sample, m/s.
    seed : int
    gain : ml/kg/min per mean squared joint torque (N*m)^2.
    spacing : uniform range of breath intervals, s.  Breath times are
        snapped to the control clock.

    Returns
    -------
    t_breath, eta : arrays
    """
    u_H = np.asarray(u_H, dtype=float)
    t = np.asarray(t, dtype=float)
    speed = np.asarray(speed, dtype=float)
    rng = np.random.default_rng([seed, _BREATH_STREAM])
    end = t[-1]
    times, values = [], []
    last_k = 0
    now = 0.0
    while True:
        now += rng.uniform(*spacing)
        k = int(round(now / dt))
        if k > len(t) - 1 or k * dt > end:
            break
        window = slice(last_k, k)
        work = float(np.mean(u_H[window] ** 2)) if k > last_k else 0.0
        v = float(speed[k])
        values.append(baseline_vo2(v) + gain * work + noise * rng.standard_normal())
        times.append(t[k])
        last_k = k
    return np.asarray(times), np.asarray(values)
