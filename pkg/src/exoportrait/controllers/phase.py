"""Gait phase and gait speed estimators."""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..gait import SPEEDS, fourier_eval, stride_length


class PhaseUndefinedError(RuntimeError):
    pass


class SpeedUnavailableError(RuntimeError):
    pass


def phase_time(t: float, T: float) -> float:
    """Time-based gait phase ``mod(t, T) / T`` in ``[0, 1)``."""
    if not T > 0:
        raise ValueError(f"stride time must be positive, got {T}")
    phi = math.fmod(t, T) / T
    if phi < 0.0:
        phi += 1.0
    return 0.0 if phi >= 1.0 else phi


class _WindowMean:
    """Running mean over a variable-length trailing window via cumulative sums."""

    def __init__(self, capacity: int):
        self.cs = np.zeros(capacity + 1)
        self.n = 0
        self.cap = capacity

    def push(self, x: float) -> None:
        i = self.n % (self.cap + 1)
        prev = self.cs[(self.n - 1) % (self.cap + 1)] if self.n else 0.0
        self.cs[i] = prev + x
        self.n += 1

    def mean(self, window: int) -> float:
        w = max(1, min(window, self.n - 1 if self.n > 1 else 1, self.cap))
        last = self.cs[(self.n - 1) % (self.cap + 1)]
        if self.n <= w:
            return last / self.n
        first = self.cs[(self.n - 1 - w) % (self.cap + 1)]
        return (last - first) / w


class KinematicPhaseEstimator:
    """Phase from the right-thigh phase portrait.

    The portrait angle ``atan2(-q_dot / omega, q - q_mean)`` is centred on
    the mean hip angle over the last estimated stride (exact for periodic
    gait) and scaled by ``omega``, the ratio of RMS velocity to RMS centred
    angle over the same window, which makes it amplitude-invariant.  The
    angle advances non-uniformly for a non-sinusoidal hip; it is mapped to
    phase through the inverse of the angle-versus-phase curve of the
    nominal hip trajectory, which also puts the nominal heel strike at zero.
    Output is held monotone between wraps.  The phase rate is the phase
    advance over the trailing stride window, low-pass filtered; unlike the
    per-sample increment it carries no within-stride jitter.
    """

    def __init__(self, dt: float, hip_coef: Sequence[float], stride_time: float,
                 rate_cutoff: float = 5.0, stationary_time: float = 2.0,
                 stationary_speed: float = 0.01, max_window: float = 4.0,
                 calibrate: bool = True, velocity_lead: float = 0.5):
        self.dt = dt
        # sampled rates are backward differences; advance them by this many samples
        self.velocity_lead = velocity_lead
        hip_coef = np.asarray(hip_coef, dtype=float)
        self.q_mean0 = float(hip_coef[0])
        self.period = float(stride_time)
        phi = np.arange(720) / 720
        q = fourier_eval(hip_coef, phi)
        qd = fourier_eval(hip_coef, phi, 1) / stride_time
        self.omega0 = float(np.sqrt(np.mean(qd ** 2) / np.mean((q - q.mean()) ** 2)))
        raw = np.arctan2(-qd / self.omega0, q - q.mean()) / (2 * math.pi)
        self.offset = float(raw[0] % 1.0)
        # portrait angle (relative to heel strike) as a function of phase
        ang = np.unwrap((raw - raw[0]) * 2 * math.pi) / (2 * math.pi)
        if ang[-1] < 0:  # portrait traversed the other way round
            ang = -ang
        ang = np.maximum.accumulate(ang)
        if calibrate and ang[-1] > 0.5:
            ang = ang / (ang[-1] + (ang[1] - ang[0]))
            self._ang = np.concatenate([ang, [1.0]])
            self._phi = np.concatenate([phi, [1.0]])
        else:
            self._ang = np.array([0.0, 1.0])
            self._phi = np.array([0.0, 1.0])
        cap = int(round(max_window / dt))
        self._q = _WindowMean(cap)
        self._q2 = _WindowMean(cap)
        self._qd2 = _WindowMean(cap)
        self._unwrapped = np.zeros(cap + 1)
        self._alpha = dt / (dt + 1.0 / (2 * math.pi * rate_cutoff))
        self.stationary_time = stationary_time
        self.stationary_speed = stationary_speed
        self.reset()

    def calibrated(self, angle: float) -> float:
        """Phase in ``[0, 1)`` for a portrait angle (cycles) measured from heel strike."""
        return float(np.interp(angle % 1.0, self._ang, self._phi)) % 1.0

    def reset(self) -> None:
        self.phi: Optional[float] = None
        self.rate = 1.0 / self.period
        self.t = 0.0
        self._still = 0.0
        self._last_wrap: Optional[float] = None
        self._prev_qd: Optional[float] = None
        self._n = 0
        self._cycles = 0
        self.wraps: list = []

    @property
    def window(self) -> int:
        return int(round(self.period / self.dt))

    def portrait(self, q_hip: float, qd_hip: float):
        """Raw portrait centre and frequency for the current window."""
        if self._q.n < 2:
            return self.q_mean0, self.omega0
        w = self.window
        m = self._q.mean(w)
        var = self._q2.mean(w) - m * m
        vd = self._qd2.mean(w)
        if self._q.n < w or var <= 1e-12 or vd <= 0:
            return (m if self._q.n >= w else self.q_mean0), self.omega0
        return m, math.sqrt(vd / var)

    def update(self, q, q_dot) -> float:
        q_h, qd_h = float(q[0]), float(q_dot[0])
        if self._prev_qd is not None and self.velocity_lead:
            qd_h, self._prev_qd = qd_h + self.velocity_lead * (qd_h - self._prev_qd), qd_h
        else:
            self._prev_qd = qd_h
        self.t += self.dt
        speed = math.sqrt(sum(float(x) * float(x) for x in q_dot))
        self._still = self._still + self.dt if speed < self.stationary_speed else 0.0
        if self._still > self.stationary_time:
            raise PhaseUndefinedError("phase undefined: stationary")
        self._q.push(q_h)
        self._q2.push(q_h * q_h)
        self._qd2.push(qd_h * qd_h)
        centre, omega = self.portrait(q_h, qd_h)
        raw = math.atan2(-qd_h / omega, q_h - centre) / (2 * math.pi)
        new = self.calibrated(raw - self.offset)
        if self.phi is None:
            self.phi = new
        else:
            inc = (new - self.phi + 0.5) % 1.0 - 0.5
            nxt = self.phi + max(inc, 0.0)
            if nxt >= 1.0:
                nxt -= 1.0
                self._cycles += 1
                if self._last_wrap is not None:
                    self.period = min(max(self.t - self._last_wrap, 0.5), 3.0)
                self._last_wrap = self.t
                self.wraps.append(self.t)
            self.phi = nxt
        buf = self._unwrapped
        size = len(buf)
        buf[self._n % size] = self._cycles + self.phi
        self._n += 1
        w = min(self.window, self._n - 1, size - 1)
        if w > 0:
            raw_rate = (buf[(self._n - 1) % size] - buf[(self._n - 1 - w) % size]) / (w * self.dt)
            self.rate += self._alpha * (raw_rate - self.rate)
        return self.phi


def phase_kinematic(q, q_dot, est_state: KinematicPhaseEstimator) -> float:
    """Advance ``est_state`` by one sample and return the phase in ``[0, 1)``."""
    return est_state.update(q, q_dot)


def classify_speed(v: float, speeds: Sequence[float] = SPEEDS) -> float:
    """Nearest speed class; exact midpoints go to the lower class."""
    best = speeds[0]
    for s in speeds[1:]:
        if abs(v - s) < abs(v - best) - 1e-12:
            best = s
    return best


def speed_estimate(t, q, right_events, left_events, lengths, gamma=None,
                   speeds: Sequence[float] = SPEEDS) -> float:
    """Speed class of the last complete stride in a recorded history.

    Parameters
    ----------
    t, q : arrays
        Sample times and ``(n, 4)`` joint angles.
    right_events, left_events : sequences of float
        Heel-strike times per leg.
    lengths : (thigh, shank) lengths, m.
    gamma : optional trunk angle samples used for the leg geometry.
    """
    right = sorted(right_events)
    if len(right) < 2:
        raise SpeedUnavailableError("speed unavailable: no complete stride")
    t0, t1 = right[-2], right[-1]
    lefts = [e for e in left_events if t0 < e <= t1]
    if not lefts:
        raise SpeedUnavailableError("speed unavailable: no left heel strike in stride")
    t = np.asarray(t)
    q = np.asarray(q)

    def at(te):
        return np.array([np.interp(te, t, q[:, j]) for j in range(4)])

    g0 = 0.0 if gamma is None else float(np.interp(t0, t, gamma))
    g1 = 0.0 if gamma is None else float(np.interp(lefts[0], t, gamma))
    sl = 0.5 * (stride_length(at(t0), at(lefts[0]), lengths, g0)
                + stride_length(at(t0), at(lefts[0]), lengths, g1))
    return classify_speed(sl / (t1 - t0), speeds)


class OnlineSpeedEstimator:
    """Stride length over stride time, refreshed at each right heel strike."""

    def __init__(self, lengths, initial: Optional[float] = None,
                 speeds: Sequence[float] = SPEEDS):
        self.lengths = tuple(lengths)
        self.speeds = tuple(speeds)
        self._value = initial
        self._last_right: Optional[tuple] = None
        self._left_q = None
        self.raw: Optional[float] = None

    @property
    def value(self) -> float:
        if self._value is None:
            raise SpeedUnavailableError("speed unavailable")
        return self._value

    def heel_strike(self, leg: str, t: float, q, gamma: float = 0.0) -> bool:
        """Register an event; returns True when the speed class changed."""
        q = np.array(q, dtype=float)
        if leg == "left":
            self._left_q = (q, gamma)
            return False
        changed = False
        if self._last_right is not None and self._left_q is not None:
            t_prev, q_prev, g_prev = self._last_right
            sl = stride_length(q_prev, self._left_q[0], self.lengths, g_prev)
            self.raw = sl / (t - t_prev)
            new = classify_speed(self.raw, self.speeds)
            changed = new != self._value
            self._value = new
        self._last_right = (t, q, gamma)
        self._left_q = None
        return changed
