"""Nominal walking kinematics used to drive and calibrate the simulator.

Joint trajectories are truncated Fourier series in the normalized gait
phase (``phi = 0`` at right heel strike).  The left leg repeats the right
leg half a stride later.  Stride times follow from the treadmill speed
and the stride length the joint angles imply, so speed estimation from
kinematics is self-consistent.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SPEEDS = (0.4, 0.6, 0.8)
SPEED_NAMES = {0.4: "ultra-slow", 0.6: "slow", 0.8: "moderate"}
HARMONICS = 5
# thigh and shank lengths of the default 1.75 m body, m
LEG_LENGTHS = (0.42875, 0.4305)

TWO_PI = 2.0 * np.pi


def _bump(phi, centre, kappa):
    return np.exp(kappa * (np.cos(TWO_PI * (phi - centre)) - 1.0))


def _hip_shape(phi, v):
    s = (v - 0.4) / 0.4
    amp = 0.22 + 0.12 * s
    return 0.08 + 0.02 * s + amp * np.cos(TWO_PI * phi - 0.45) + 0.03 * np.cos(2 * TWO_PI * phi - 1.2)


def _knee_shape(phi, v):
    s = (v - 0.4) / 0.4
    return -(0.12 + (0.12 + 0.08 * s) * _bump(phi, 0.13, 6.0)
             + (0.68 + 0.18 * s) * _bump(phi, 0.72, 2.5))


def fourier_fit(samples: np.ndarray, m: int = HARMONICS) -> np.ndarray:
    """Coefficients ``[a0, a1, b1, ..., am, bm]`` of uniformly sampled periodic data."""
    n = len(samples)
    spec = np.fft.rfft(samples) / n
    coef = np.empty(2 * m + 1)
    coef[0] = spec[0].real
    coef[1::2] = 2.0 * spec[1:m + 1].real
    coef[2::2] = -2.0 * spec[1:m + 1].imag
    return coef


def fourier_eval(coef: np.ndarray, phi, order: int = 0):
    """Evaluate a Fourier series (or its ``order``-th phase derivative)."""
    coef = np.asarray(coef)
    m = (coef.shape[-1] - 1) // 2
    phi = np.asarray(phi, dtype=float)
    k = np.arange(1, m + 1)
    arg = TWO_PI * np.multiply.outer(phi, k)
    w = (TWO_PI * k) ** order
    c, s = np.cos(arg), np.sin(arg)
    a, b = coef[..., 1::2], coef[..., 2::2]
    # d/dphi cycles cos -> -sin -> -cos -> sin
    if order % 4 == 0:
        val = a * c + b * s
    elif order % 4 == 1:
        val = -a * s + b * c
    elif order % 4 == 2:
        val = -a * c - b * s
    else:
        val = a * s - b * c
    out = np.sum(w * val, axis=-1)
    return out + coef[..., 0] if order == 0 else out


@dataclass(frozen=True)
class NominalGait:
    """Per-speed Fourier coefficients of the right hip and knee angles."""

    hip: dict
    knee: dict

    @classmethod
    @lru_cache(maxsize=None)
    def default(cls) -> "NominalGait":
        phi = np.arange(512) / 512
        hip = {v: fourier_fit(_hip_shape(phi, v)) for v in SPEEDS}
        knee = {v: fourier_fit(_knee_shape(phi, v)) for v in SPEEDS}
        return cls(hip, knee)

    def coefficients(self, v: float) -> np.ndarray:
        """``(2, 2m+1)`` right-leg coefficients, linearly interpolated in speed."""
        v = float(np.clip(v, SPEEDS[0], SPEEDS[-1]))
        for lo, hi in zip(SPEEDS[:-1], SPEEDS[1:]):
            if v <= hi:
                w = (v - lo) / (hi - lo)
                return np.stack([(1 - w) * self.hip[lo] + w * self.hip[hi],
                                 (1 - w) * self.knee[lo] + w * self.knee[hi]])
        raise AssertionError("unreachable")

    def joint_coefficients(self, v: float) -> np.ndarray:
        """``(4, 2m+1)`` coefficients for all joints, left leg shifted by half a stride."""
        right = self.coefficients(v)
        return np.concatenate([right, shift_phase(right, 0.5)])

    def angles(self, phi, v: float, order: int = 0) -> np.ndarray:
        """Joint angles ``[..., 4]`` (or phase derivatives) at right-leg phase ``phi``."""
        return np.moveaxis(fourier_eval(self.joint_coefficients(v)[:, None, :],
                                        np.atleast_1d(phi), order), 0, -1).reshape(
            np.shape(phi) + (4,))

    def stride_length(self, v: float, lengths=LEG_LENGTHS, gamma: float = 0.0) -> float:
        q0 = self.angles(0.0, v)
        q5 = self.angles(0.5, v)
        return stride_length(q0, q5, lengths, gamma)

    def stride_time(self, v: float, lengths=LEG_LENGTHS) -> float:
        """Stride time at which these kinematics cover ``v`` m/s on the belt."""
        return self.stride_length(v, lengths) / v


def shift_phase(coef: np.ndarray, delta: float) -> np.ndarray:
    """Coefficients of ``f(phi + delta)``."""
    coef = np.array(coef, dtype=float)
    m = (coef.shape[-1] - 1) // 2
    out = coef.copy()
    for k in range(1, m + 1):
        a, b = coef[..., 2 * k - 1], coef[..., 2 * k]
        ang = TWO_PI * k * delta
        out[..., 2 * k - 1] = a * np.cos(ang) + b * np.sin(ang)
        out[..., 2 * k] = -a * np.sin(ang) + b * np.cos(ang)
    return out


def ankle_x(q_hip, q_knee, lengths, gamma=0.0):
    """Horizontal ankle position relative to the hip, m."""
    a1 = gamma + q_hip
    return lengths[0] * np.sin(a1) + lengths[1] * np.sin(a1 + q_knee)


def stride_length(q_right_hs, q_left_hs, lengths, gamma=0.0) -> float:
    """Stride length from joint angles at a right and the next left heel strike.

    Each step length is the fore-aft ankle separation at the leading leg's
    heel strike.
    """
    qr, ql = np.asarray(q_right_hs), np.asarray(q_left_hs)
    step_r = ankle_x(qr[0], qr[1], lengths, gamma) - ankle_x(qr[2], qr[3], lengths, gamma)
    step_l = ankle_x(ql[2], ql[3], lengths, gamma) - ankle_x(ql[0], ql[1], lengths, gamma)
    return float(step_r + step_l)


@dataclass(frozen=True)
class TrunkMotion:
    """Trunk pitch and hip-point acceleration oscillating twice per stride."""

    lean: float = 0.05
    pitch_amp: float = 0.02
    bob_amp: float = 0.015
    surge_amp: float = 0.3

    def at(self, phi: float, period: float):
        """``(gamma, gamma_dot, gamma_ddot, (a_x, a_z))`` at phase ``phi``."""
        w = 2.0 * TWO_PI / period
        x = 2.0 * TWO_PI * phi
        s, c = np.sin(x), np.cos(x)
        gamma = self.lean + self.pitch_amp * s
        gamma_dot = self.pitch_amp * w * c
        gamma_ddot = -self.pitch_amp * w * w * s
        a_z = -self.bob_amp * w * w * c
        a_x = self.surge_amp * s
        return gamma, gamma_dot, gamma_ddot, (a_x, a_z)
