"""Adaptive model-based torque control: Fourier trajectory learning.

Each joint's reference is ``r_E(phi) = r0(phi) + theta . psi(phi)`` with
``psi = [1, cos 2pi phi, sin 2pi phi, ..., cos 2pi m phi, sin 2pi m phi]``.
Coefficients descend the squared tracking error, ``theta_dot = -eps e psi``,
independently per joint.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..dynamics import PlantModel, PlantState, gamma_torques
from ..gait import TWO_PI, fourier_eval


class AdaptationDivergedError(RuntimeError):
    def __init__(self, joint: int, value: float):
        self.joint = joint
        super().__init__(f"adaptation diverged: joint {joint} coefficient {value:.3f}")


def basis(phi: float, m: int, dc: bool = True, order: int = 0) -> np.ndarray:
    """Fourier basis vector (or its ``order``-th phase derivative)."""
    k = np.arange(1, m + 1)
    arg = TWO_PI * k * phi
    w = (TWO_PI * k) ** order
    c, s = np.cos(arg), np.sin(arg)
    pair = [(c, s), (-s, c), (-c, -s), (s, -c)][order % 4]
    out = np.empty(2 * m + (1 if dc else 0))
    off = 1 if dc else 0
    if dc:
        out[0] = 1.0 if order == 0 else 0.0
    out[off::2] = w * pair[0]
    out[off + 1::2] = w * pair[1]
    return out


@dataclass
class AmtcState:
    """Adaptive controller memory.

    ``theta`` has shape ``(4, 2m + dc)``; ``r0`` holds Fourier coefficients
    ``(4, 2 m0 + 1)`` of the base trajectory; ``epsilon`` is the per-joint
    learning rate.
    """

    theta: np.ndarray
    m: int
    epsilon: np.ndarray
    r0: np.ndarray
    dc: bool = True
    guard: float = 1.5

    @classmethod
    def initial(cls, r0, m: int = 5, epsilon=0.5, dc: bool = True, guard: float = 1.5):
        n = 2 * m + (1 if dc else 0)
        eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (4,)).copy()
        return cls(np.zeros((4, n)), m, eps, np.asarray(r0, dtype=float), dc, guard)

    def copy(self) -> "AmtcState":
        return replace(self, theta=self.theta.copy(), epsilon=self.epsilon.copy())

    def modification(self, phi: float) -> np.ndarray:
        """Per-joint modification term ``theta . psi(phi)``."""
        return self.theta @ basis(phi, self.m, self.dc)


def amtc_reference(state: AmtcState, phi: float, phase_rate: float = 1.0):
    """Reference angle, rate and acceleration per joint.

    Time derivatives chain the analytic phase derivatives with
    ``phase_rate`` (cycles per second); the phase acceleration is neglected.
    """
    psi0 = basis(phi, state.m, state.dc)
    psi1 = basis(phi, state.m, state.dc, 1)
    psi2 = basis(phi, state.m, state.dc, 2)
    r = fourier_eval(state.r0, phi) + state.theta @ psi0
    dr = fourier_eval(state.r0, phi, 1) + state.theta @ psi1
    ddr = fourier_eval(state.r0, phi, 2) + state.theta @ psi2
    return r, dr * phase_rate, ddr * phase_rate * phase_rate


def amtc_adapt(state: AmtcState, e, phi: float, dt: float) -> AmtcState:
    """One gradient step of ``0.5 e^2`` w.r.t. the coefficients (per joint)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = np.asarray(e, dtype=float)
    psi = basis(phi, state.m, state.dc)
    theta = state.theta - dt * (state.epsilon * e)[:, None] * psi[None, :]
    over = np.abs(theta) > state.guard
    if not np.all(np.isfinite(theta)) or over.any():
        bad = np.nonzero(over | ~np.isfinite(theta))
        j = int(bad[0][0])
        raise AdaptationDivergedError(j, float(theta[bad][0]))
    return replace(state, theta=theta)


def amtc_torque(model: PlantModel, state: PlantState, r) -> np.ndarray:
    """Model torque with the joint kinematics replaced by the reference."""
    r_pos, r_vel, r_acc = r
    ref = PlantState(state.t, state.gamma, state.gamma_dot, state.gamma_ddot,
                     state.accel, np.asarray(r_pos, float), np.asarray(r_vel, float),
                     np.asarray(r_acc, float))
    return gamma_torques(model, ref)
