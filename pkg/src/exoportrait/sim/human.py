"""Parameterised simulated wearers.

A wearer tracks its own desired joint trajectory ``r_H(phi)`` with a PD law
scaled by an engagement level, optionally adding a feedforward of its own
limb dynamics, and always contributes passive joint damping::

    u_H = g(t) * [ff + Kp (r_H - q) + Kd (r_H_dot - q_dot)] - b q_dot

The four kinds differ only in defaults: a follower has zero engagement, a
conflicting wearer tracks a phase-shifted copy of its trajectory, and a
yielding wearer's engagement decays exponentially with time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..controllers.amtc import basis
from ..dynamics import PlantModel, PlantState, gamma_torques
from ..gait import HARMONICS, TWO_PI, NominalGait, fourier_fit, fourier_eval, shift_phase

KINDS = ("leader", "follower", "conflicting", "yielding")

STANCE = 0.62


@dataclass(frozen=True)
class HumanPolicy:
    """Wearer behaviour.

    Parameters
    ----------
    kind : one of ``KINDS``.
    kp, kd : per-joint PD gains, N*m/rad and N*m*s/rad.
    damping : passive joint damping, N*m*s/rad.
    engagement : scale of the active torque, in [0, 1].
    phase_offset : shift of the tracked trajectory for ``conflicting``, rad.
    yield_tau, yield_floor, yield_start : exponential decay of the
        engagement for ``yielding`` (time constant s, asymptote, onset s).
    feedforward : fraction in [0, 1] of the wearer's own limb inverse
        dynamics (less ground support) added to the PD law.
    hip_gain, knee_gain : relative enlargement of the swing excursions
        of the wearer's trajectory over the nominal gait (0 = nominal).
    trajectory : optional ``(4, 2m+1)`` Fourier coefficients overriding the
        nominal-derived trajectory at every speed.
    period : optional stride time overriding the natural one, s.
    """

    kind: str = "leader"
    kp: tuple = (150.0, 80.0, 150.0, 80.0)
    kd: tuple = (10.0, 5.0, 10.0, 5.0)
    damping: tuple = (1.0, 1.0, 1.0, 1.0)
    engagement: float = 1.0
    phase_offset: float = 0.0
    yield_tau: float = 15.0
    yield_floor: float = 0.0
    yield_start: float = 0.0
    feedforward: float = 1.0
    hip_gain: float = 0.0
    knee_gain: float = 0.0
    trajectory: Optional[np.ndarray] = field(default=None, compare=False)
    period: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        for name in ("kp", "kd", "damping"):
            vals = getattr(self, name)
            if len(vals) != 4 or any(v < 0 for v in vals):
                raise ValueError(f"{name} must be 4 non-negative values")
        if not 0.0 <= self.engagement <= 1.0 or not 0.0 <= self.yield_floor <= 1.0:
            raise ValueError("engagement must lie in [0, 1]")
        if not 0.0 <= self.feedforward <= 1.0:
            raise ValueError("feedforward fraction must lie in [0, 1]")
        if self.yield_tau <= 0:
            raise ValueError("yield_tau must be positive")

    @classmethod
    def of_kind(cls, kind: str, **kw) -> "HumanPolicy":
        """Policy with the defaults of ``kind`` (``follower`` is disengaged,
        ``conflicting`` tracks a trajectory shifted by a quarter stride)."""
        defaults = {"follower": {"engagement": 0.0},
                    "conflicting": {"phase_offset": math.pi / 2}}.get(kind, {})
        return cls(kind=kind, **{**defaults, **kw})

    def engagement_at(self, t: float) -> float:
        if self.kind != "yielding":
            return self.engagement
        decay = math.exp(-max(0.0, t - self.yield_start) / self.yield_tau)
        return self.yield_floor + (self.engagement - self.yield_floor) * decay

    def coefficients(self, gait: NominalGait, v: float) -> np.ndarray:
        """Fourier coefficients ``(4, 2m+1)`` of the tracked trajectory at speed ``v``."""
        if self.trajectory is not None:
            coef = np.asarray(self.trajectory, dtype=float)
        else:
            coef = _styled(gait.coefficients(v), self.hip_gain, self.knee_gain)
            coef = np.concatenate([coef, shift_phase(coef, 0.5)])
        if self.kind == "conflicting" and self.phase_offset:
            coef = shift_phase(coef, self.phase_offset / TWO_PI)
        return coef

    def stride_time(self, gait: NominalGait, v: float) -> float:
        return self.period if self.period is not None else gait.stride_time(v)


def _styled(right: np.ndarray, hip_gain: float, knee_gain: float) -> np.ndarray:
    """Wearer-specific deviation from the nominal gait.

    The hip gains ``hip_gain`` times its fundamental amplitude along
    ``sin(2 pi phi)``; the knee excursions about the mean are enlarged by
    ``knee_gain * sin^2(2 pi phi)``.  Both vanish at the two heel strikes so
    step lengths, and with them the cadence on the belt, are unchanged.
    """
    out = np.array(right, dtype=float)
    out[0, 2] += hip_gain * math.hypot(right[0, 1], right[0, 2])
    if knee_gain:
        phi = np.arange(512) / 512
        x = fourier_eval(right[1], phi)
        win = np.sin(TWO_PI * phi) ** 2
        out[1] = fourier_fit(x + knee_gain * win * (x - x.mean()), HARMONICS)
    return out


def ground_support(phi: float, amplitude=(4.0, 8.0)) -> np.ndarray:
    """Joint torques the ground applies through a stance leg, N*m.

    A half-sine over stance, flexing both hip and knee; ``phi`` is the
    right-leg phase and the left leg is half a stride behind.
    """
    out = np.zeros(4)
    for leg, shift in ((0, 0.0), (1, 0.5)):
        x = (phi - shift) % 1.0
        if x < STANCE:
            s = math.sin(math.pi * x / STANCE)
            out[2 * leg] = -amplitude[0] * s
            out[2 * leg + 1] = -amplitude[1] * s
    return out


def passive_limits(q, q_dot, hip=(-0.45, 1.9), knee=(-2.1, -0.08),
                   stiffness=400.0, damping=4.0) -> np.ndarray:
    """Passive tissue torque resisting motion past the comfortable joint range."""
    out = np.zeros(4)
    for j in range(4):
        lo, hi = knee if j % 2 else hip
        x, xd = float(q[j]), float(q_dot[j])
        if x > hi:
            out[j] = -stiffness * (x - hi) - (damping * xd if xd > 0 else 0.0)
        elif x < lo:
            out[j] = stiffness * (lo - x) - (damping * xd if xd < 0 else 0.0)
    return out


def reference_from_coefficients(coef: np.ndarray, phi: float, phase_rate: float):
    """``(r, r_dot, r_ddot)`` of a Fourier trajectory at constant phase rate."""
    m = (coef.shape[-1] - 1) // 2
    r = coef @ basis(phi, m)
    rd = coef @ basis(phi, m, True, 1) * phase_rate
    rdd = coef @ basis(phi, m, True, 2) * (phase_rate * phase_rate)
    return r, rd, rdd


def human_torque(policy: HumanPolicy, state: PlantState, phi: float,
                 speed: float = 0.6, t: Optional[float] = None,
                 model: Optional[PlantModel] = None, gait: Optional[NominalGait] = None,
                 reference=None, support=None) -> np.ndarray:
    """Wearer torque at ``state`` when its own gait clock reads ``phi``.

    ``reference`` may carry a precomputed ``(r, r_dot, r_ddot)``; otherwise
    it is evaluated from the policy at ``speed``.  The feedforward is only
    added when ``model`` is given (human limb segments are taken from it);
    ``support`` is the ground-support torque the feedforward compensates.
    """
    if reference is None:
        gait = gait or NominalGait.default()
        coef = policy.coefficients(gait, speed)
        reference = reference_from_coefficients(coef, phi, 1.0 / policy.stride_time(gait, speed))
    r, rd, rdd = reference
    g = policy.engagement_at(state.t if t is None else t)
    b = np.asarray(policy.damping)
    u = -b * state.q_dot
    if g == 0.0:
        return u
    active = np.asarray(policy.kp) * (r - state.q) + np.asarray(policy.kd) * (rd - state.q_dot)
    if policy.feedforward and model is not None:
        ref = PlantState(state.t, state.gamma, state.gamma_dot, state.gamma_ddot,
                         state.accel, r, rd, rdd)
        ff = gamma_torques(model.human_only(), ref) + b * rd
        if support is not None:
            ff = ff - support
        active = active + policy.feedforward * ff
    return u + g * active


class SimulatedHuman:
    """Stateful wearer: own gait clock, speed schedule and heel-strike events.

    Speed changes on the belt take effect at the wearer's next right heel
    strike; the trajectory shape is blended over the following stride.
    """

    def __init__(self, policy: HumanPolicy, model: PlantModel, gait: NominalGait,
                 schedule, support_amplitude=(4.0, 8.0), feedforward_model: Optional[PlantModel] = None):
        self.policy = policy
        self.gait = gait
        self.schedule = [(float(v), float(d)) for v, d in schedule]
        self.bounds = np.cumsum([d for _, d in self.schedule])
        self.support_amplitude = tuple(support_amplitude)
        self.ff_model = (feedforward_model or model).human_only()
        self.t = 0.0
        self.phi = 0.0
        self.cycles = 0
        self.speed = self.schedule[0][0]
        self.period = policy.stride_time(gait, self.speed)
        self.coef = policy.coefficients(gait, self.speed)
        self._from: Optional[np.ndarray] = None
        self.events: list = [("right", 0.0)]

    def scheduled_speed(self, t: float) -> float:
        i = int(np.searchsorted(self.bounds, t, side="right"))
        return self.schedule[min(i, len(self.schedule) - 1)][0]

    def current_coefficients(self) -> np.ndarray:
        if self._from is None:
            return self.coef
        return (1.0 - self.phi) * self._from + self.phi * self.coef

    def reference(self):
        return reference_from_coefficients(self.current_coefficients(), self.phi, 1.0 / self.period)

    def support(self) -> np.ndarray:
        return ground_support(self.phi, self.support_amplitude)

    def torque(self, state: PlantState, support: Optional[np.ndarray] = None) -> np.ndarray:
        pol = self.policy
        r, rd, rdd = self.reference()
        g = pol.engagement_at(self.t)
        b = np.asarray(pol.damping)
        u = -b * state.q_dot
        if g == 0.0:
            return u
        active = np.asarray(pol.kp) * (r - state.q) + np.asarray(pol.kd) * (rd - state.q_dot)
        if pol.feedforward:
            ref = PlantState(state.t, state.gamma, state.gamma_dot, state.gamma_ddot,
                             state.accel, r, rd, rdd)
            ff = gamma_torques(self.ff_model, ref) + b * rd
            ff -= self.support() if support is None else support
            active += pol.feedforward * ff
        return u + g * active

    def advance(self, dt: float) -> list:
        """Move the gait clock by ``dt``; returns ``(leg, exact_time)`` events."""
        out = []
        phi0 = self.phi
        phi1 = phi0 + dt / self.period
        if phi0 < 0.5 <= phi1:
            out.append(("left", self.t + (0.5 - phi0) * self.period))
        t1 = self.t + dt
        if phi1 >= 1.0:
            te = self.t + (1.0 - phi0) * self.period
            out.append(("right", te))
            self.cycles += 1
            rest = (phi1 - 1.0) * self.period  # time already spent in the new stride
            self._from = None
            v = self.scheduled_speed(te)
            if v != self.speed:
                self._from = self.coef
                self.speed = v
                self.coef = self.policy.coefficients(self.gait, v)
                self.period = self.policy.stride_time(self.gait, v)
            phi1 = rest / self.period
        self.t = t1
        self.phi = phi1
        self.events.extend(out)
        return out

    @property
    def unwrapped_phase(self) -> float:
        return self.cycles + self.phi
