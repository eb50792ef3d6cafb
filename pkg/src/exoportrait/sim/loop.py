"""Fixed-rate closed-loop integration of exoskeleton, wearer and legs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..controllers.runtime import Controller
from ..dynamics import PlantModel, PlantState, clamp_torque, step_plant
from ..gait import TrunkMotion
from .human import SimulatedHuman, passive_limits


class TrialAbortedError(RuntimeError):
    def __init__(self, t: float, cause: Exception):
        self.t = t
        self.cause = cause
        super().__init__(f"trial aborted at t = {t:.3f} s: {cause}")


@dataclass
class LoopRecord:
    """Per-tick log; row ``k`` holds the state at tick ``k`` and the
    torques and acceleration applied from that state."""

    t: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    gamma_ddot: np.ndarray
    accel: np.ndarray
    u_E: np.ndarray
    u_H: np.ndarray
    support: np.ndarray  # ground support plus passive tissue torques
    phase_human: np.ndarray  # unwrapped wearer phase, cycles
    phase_ctrl: np.ndarray
    events: list  # (leg, time) wearer heel strikes

    def state(self) -> PlantState:
        """All rows as one batched state (for vectorised inverse dynamics)."""
        return PlantState(self.t, self.gamma, self.gamma_dot, self.gamma_ddot,
                          self.accel, self.q, self.q_dot, self.q_ddot)


def initial_state(human: SimulatedHuman, trunk: TrunkMotion) -> PlantState:
    r, rd, _ = human.reference()
    g, gd, gdd, acc = trunk.at(human.phi, human.period)
    return PlantState(0.0, g, gd, gdd, np.array(acc), r.copy(), rd.copy(), np.zeros(4))


def run_loop(model: PlantModel, controller: Controller, human: SimulatedHuman,
             duration: float, dt: float = 0.005, trunk: TrunkMotion = TrunkMotion(),
             state: PlantState = None) -> LoopRecord:
    """Integrate for ``round(duration / dt)`` ticks.

    ``model`` is the true coupled plant.  Heel strikes of the wearer are
    reported to the controller at the first tick after they occur.
    """
    n = int(round(duration / dt))
    state = initial_state(human, trunk) if state is None else state
    cols = {k: np.empty((n, 4)) for k in ("q", "q_dot", "q_ddot", "u_E", "u_H", "support")}
    scal = {k: np.empty(n) for k in ("t", "gamma", "gamma_dot", "gamma_ddot", "ph", "pc")}
    accel = np.empty((n, 2))
    pending = []
    for k in range(n):
        t = k * dt
        state.t = t
        for leg, _ in pending:
            controller.heel_strike(leg, t, state.q, state.gamma)
        try:
            u_E = clamp_torque(model, controller.command(state))
            support = human.support()
            u_H = human.torque(state, support)
            external = support + passive_limits(state.q, state.q_dot)
            new = step_plant(model, state, u_E, u_H, dt, u_ext=external)
        except Exception as exc:  # plant and estimator errors abort with time and cause
            raise TrialAbortedError(t, exc) from exc
        cols["q"][k] = state.q
        cols["q_dot"][k] = state.q_dot
        cols["q_ddot"][k] = new.q_ddot
        cols["u_E"][k] = u_E
        cols["u_H"][k] = u_H
        cols["support"][k] = external
        scal["t"][k] = t
        scal["gamma"][k] = state.gamma
        scal["gamma_dot"][k] = state.gamma_dot
        scal["gamma_ddot"][k] = state.gamma_ddot
        scal["ph"][k] = human.unwrapped_phase
        scal["pc"][k] = controller.phase
        accel[k] = state.accel
        pending = human.advance(dt)
        g, gd, gdd, acc = trunk.at(human.phi, human.period)
        new.gamma, new.gamma_dot, new.gamma_ddot = g, gd, gdd
        new.accel = np.array(acc)
        state = new
    return LoopRecord(scal["t"], cols["q"], cols["q_dot"], cols["q_ddot"], scal["gamma"],
                      scal["gamma_dot"], scal["gamma_ddot"], accel, cols["u_E"], cols["u_H"],
                      cols["support"], scal["ph"], scal["pc"], list(human.events))
