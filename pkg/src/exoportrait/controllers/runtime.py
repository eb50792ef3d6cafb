"""Stateful controller instances advanced by the 200 Hz control loop.

Each controller owns its estimators and is single-owner mutable state;
``command`` is called once per control tick with the measured state and
``heel_strike`` whenever a ground-contact event is reported.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..dynamics import PlantModel, PlantState
from ..gait import SPEEDS, NominalGait
from .amtc import AmtcState, amtc_adapt, amtc_reference, amtc_torque
from .ksc import KscParams, ksc_torque
from .lookup import TorqueLookup, tbc_torque
from .phase import KinematicPhaseEstimator, OnlineSpeedEstimator, phase_time


def htc_torque(u_ksc, u_gpc, w: float) -> np.ndarray:
    """Convex blend ``w * u_ksc + (1 - w) * u_gpc``."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"HTC weight must lie in [0, 1], got {w}")
    u_ksc = np.asarray(u_ksc, dtype=float)
    u_gpc = np.asarray(u_gpc, dtype=float)
    if w == 1.0:
        return u_ksc.copy()
    if w == 0.0:
        return u_gpc.copy()
    return w * u_ksc + (1.0 - w) * u_gpc


class Controller:
    name = "NONE"

    def command(self, state: PlantState) -> np.ndarray:
        return np.zeros(4)

    def heel_strike(self, leg: str, t: float, q, gamma: float = 0.0) -> None:
        pass

    @property
    def phase(self) -> float:
        return float("nan")


class _SpeedAware(Controller):
    def __init__(self, model: PlantModel, gait: NominalGait, initial_speed: float):
        self.model = model
        self.gait = gait
        self.speed = OnlineSpeedEstimator(model.leg_lengths()[0], initial=initial_speed)

    def heel_strike(self, leg, t, q, gamma=0.0):
        self.speed.heel_strike(leg, t, q, gamma)


class TBC(_SpeedAware):
    """Time-based phase into a speed-indexed torque table.

    The stride period is the natural stride time at the estimated speed
    class; the phase clock is re-anchored at the heel strike where the
    estimated class changes.
    """

    name = "TBC"

    def __init__(self, model, gait, lookup: TorqueLookup, stride_times: dict,
                 initial_speed: float = SPEEDS[0], t0: float = 0.0):
        super().__init__(model, gait, initial_speed)
        self.lookup = lookup
        self.stride_times = dict(stride_times)
        self.anchor = t0
        self._phi = 0.0

    def heel_strike(self, leg, t, q, gamma=0.0):
        before = self.speed._value
        self.speed.heel_strike(leg, t, q, gamma)
        if leg == "right" and self.speed._value != before:
            self.anchor = t

    @property
    def period(self) -> float:
        return self.stride_times[self.speed.value]

    def command(self, state):
        self._phi = phase_time(state.t - self.anchor, self.period)
        return tbc_torque(self.lookup, self._phi, self.speed.value)

    @property
    def phase(self):
        return self._phi


class HTC(_SpeedAware):
    """Blend of the kinematic-state approximator and the phase-indexed table."""

    name = "HTC"

    def __init__(self, model, gait, lookup: TorqueLookup, ksc: KscParams, w: float = 0.5,
                 dt: float = 0.005, initial_speed: float = SPEEDS[0]):
        super().__init__(model, gait, initial_speed)
        if not 0.0 <= w <= 1.0:
            raise ValueError("HTC weight must lie in [0, 1]")
        self.lookup = lookup
        self.ksc = ksc
        self.w = w
        self.estimator = KinematicPhaseEstimator(
            dt, gait.coefficients(initial_speed)[0], gait.stride_time(initial_speed))

    def command(self, state):
        phi = self.estimator.update(state.q, state.q_dot)
        u_gpc = tbc_torque(self.lookup, phi, self.speed.value)
        u_ksc = ksc_torque(self.ksc, state.q, state.q_dot, state.gamma)
        return htc_torque(u_ksc, u_gpc, self.w)

    @property
    def phase(self):
        return self.estimator.phi if self.estimator.phi is not None else float("nan")


class AMTC(Controller):
    """Model torque along an online-learned, phase-indexed reference."""

    name = "AMTC"

    def __init__(self, model: PlantModel, gait: NominalGait, amtc: AmtcState,
                 dt: float = 0.005, initial_speed: float = SPEEDS[0],
                 adapt: bool = True, rate_cutoff: float = 5.0):
        self.model = model
        self.state = amtc
        self.dt = dt
        self.adapt = adapt
        # the portrait is calibrated on the right-hip row of the base trajectory
        self.estimator = KinematicPhaseEstimator(
            dt, amtc.r0[0], gait.stride_time(initial_speed), rate_cutoff=rate_cutoff)
        self.reference: Optional[tuple] = None

    def command(self, state):
        phi = self.estimator.update(state.q, state.q_dot)
        r = amtc_reference(self.state, phi, self.estimator.rate)
        self.reference = r
        if self.adapt:
            self.state = amtc_adapt(self.state, r[0] - state.q, phi, self.dt)
        return amtc_torque(self.model, state, r)

    @property
    def phase(self):
        return self.estimator.phi if self.estimator.phi is not None else float("nan")


class PDTracking(Controller):
    """Stiff joint-space PD tracking of a phase-indexed trajectory (table recording)."""

    name = "PD"

    def __init__(self, trajectory, kp=(1500.0, 300.0, 1500.0, 300.0),
                 kd=(90.0, 10.0, 90.0, 10.0)):
        self.trajectory = trajectory  # callable t -> (r, r_dot)
        self.kp = np.asarray(kp, dtype=float)
        self.kd = np.asarray(kd, dtype=float)

    def command(self, state):
        r, rd = self.trajectory(state.t)
        return self.kp * (r - state.q) + self.kd * (rd - state.q_dot)
