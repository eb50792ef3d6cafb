"""Sagittal-plane rigid-body model of the coupled human-exoskeleton legs.

The trunk is kinematically prescribed (angle ``gamma`` from the downward
vertical and the linear acceleration ``accel`` of the hip point); each leg
is a two-link pendulum hanging from the hip.  Joint order is always
``[hip_right, knee_right, hip_left, knee_left]``; positive hip angles are
flexion, negative knee angles are flexion.

Absolute segment angles follow from the joint angles as::

    alpha_thigh = gamma + q_hip
    alpha_shank = gamma + q_hip + q_knee

The leg equations are written once (``_leg_terms``) against injected
``sin``/``cos`` so the same code serves scalar ``math`` calls in the
simulation loop and vectorised ``numpy`` calls in batch analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

JOINTS = ("hip_right", "knee_right", "hip_left", "knee_left")
N_JOINTS = 4


class InvalidStateError(ValueError):
    """Raised when a state carries non-finite or mis-shaped entries."""


class JointLimitError(RuntimeError):
    """Raised by the integrator when a joint leaves its mechanical range."""

    def __init__(self, joint: int, t: float, value: float):
        self.joint = joint
        self.t = t
        self.value = value
        super().__init__(
            f"joint limit violated: {JOINTS[joint]} = {value:.4f} rad at t = {t:.4f} s"
        )


@dataclass(frozen=True)
class Segment:
    """Rigid segment; ``com`` is measured from the proximal joint and
    ``inertia`` is about the segment's own centre of mass."""

    mass: float
    length: float
    com: float
    inertia: float

    def __post_init__(self):
        if not (self.mass > 0 and self.length > 0 and self.inertia > 0):
            raise ValueError(f"segment parameters must be strictly positive: {self}")
        if not self.com >= 0:
            raise ValueError(f"segment com offset must be non-negative: {self}")

    def scaled(self, alpha: float) -> "Segment":
        return Segment(self.mass * alpha, self.length, self.com, self.inertia * alpha)


def lump(a: Segment, b: Segment) -> Segment:
    """Rigidly attach two co-located segments (shared proximal joint)."""
    m = a.mass + b.mass
    c = (a.mass * a.com + b.mass * b.com) / m
    inertia = a.inertia + a.mass * (a.com - c) ** 2 + b.inertia + b.mass * (b.com - c) ** 2
    return Segment(m, max(a.length, b.length), c, inertia)


@dataclass(frozen=True)
class BodySegments:
    trunk: Segment
    thigh_r: Segment
    shank_r: Segment
    thigh_l: Segment
    shank_l: Segment

    def legs(self):
        return ((self.thigh_r, self.shank_r), (self.thigh_l, self.shank_l))

    def scaled(self, alpha: float) -> "BodySegments":
        return BodySegments(*(getattr(self, f).scaled(alpha) for f in _SEGMENT_FIELDS))

    def lumped_with(self, other: "BodySegments") -> "BodySegments":
        return BodySegments(*(lump(getattr(self, f), getattr(other, f)) for f in _SEGMENT_FIELDS))


_SEGMENT_FIELDS = ("trunk", "thigh_r", "shank_r", "thigh_l", "shank_l")


def anthropometric_body(mass: float = 75.0, height: float = 1.75) -> BodySegments:
    """Human segments from standard anthropometric fractions (Winter).

    The shank segment carries the foot as a point-like mass at the ankle.
    """
    thigh_len = 0.245 * height
    shank_len = 0.246 * height
    thigh = Segment(0.100 * mass, thigh_len, 0.433 * thigh_len,
                    0.100 * mass * (0.323 * thigh_len) ** 2)
    leg = Segment(0.0465 * mass, shank_len, 0.433 * shank_len,
                  0.0465 * mass * (0.302 * shank_len) ** 2)
    foot = Segment(0.0145 * mass, shank_len, shank_len + 0.039 * height,
                   0.0145 * mass * (0.475 * 0.152 * height) ** 2)
    shank = lump(leg, foot)
    trunk = Segment(0.678 * mass, 0.288 * height, 0.626 * 0.288 * height,
                    0.678 * mass * (0.496 * 0.288 * height) ** 2)
    return BodySegments(trunk, thigh, shank, thigh, shank)


def indego_like_body(height: float = 1.75) -> BodySegments:
    """Exoskeleton segments totalling 17 kg, joint axes aligned with the user."""
    thigh_len = 0.245 * height
    shank_len = 0.246 * height
    trunk = Segment(7.0, 0.25, 0.10, 0.12)
    thigh = Segment(3.5, thigh_len, 0.45 * thigh_len, 3.5 * (0.30 * thigh_len) ** 2)
    shank = Segment(1.5, shank_len, 0.35 * shank_len, 1.5 * (0.30 * shank_len) ** 2)
    return BodySegments(trunk, thigh, shank, thigh, shank)


@dataclass(frozen=True)
class PlantModel:
    """Parameters of the generalized torque map.

    With ``include_human_inertia`` false the map describes the exoskeleton
    alone (its estimated dynamics); with it true, human segments are lumped
    onto the exoskeleton segments, which is the true coupled plant.
    """

    exo: BodySegments = field(default_factory=indego_like_body)
    human: BodySegments = field(default_factory=anthropometric_body)
    friction: tuple = (0.5, 0.5, 0.5, 0.5)
    gravity: float = 9.81
    include_human_inertia: bool = False
    torque_limit: float = 60.0
    hip_limits: tuple = (-0.6, 2.1)
    knee_limits: tuple = (-2.3, 0.05)

    def __post_init__(self):
        if len(self.friction) != N_JOINTS or any(f < 0 for f in self.friction):
            raise ValueError("friction must be 4 non-negative coefficients")
        if not self.gravity >= 0:
            raise ValueError("gravity must be non-negative")
        for (te, se), (th, sh) in zip(self.exo.legs(), self.human.legs()):
            if abs(te.length - th.length) > 1e-9 or abs(se.length - sh.length) > 1e-9:
                raise ValueError("exoskeleton and human limb lengths must coincide")

    @property
    def body(self) -> BodySegments:
        if self.include_human_inertia:
            return self.exo.lumped_with(self.human)
        return self.exo

    def with_human(self) -> "PlantModel":
        return replace(self, include_human_inertia=True)

    def human_only(self) -> "PlantModel":
        """Plant for walking without the device: human segments, no friction."""
        return replace(self, exo=self.human, include_human_inertia=False,
                       friction=(0.0,) * N_JOINTS)

    def scaled(self, alpha: float) -> "PlantModel":
        """Multiply every mass, inertia and friction coefficient by ``alpha``."""
        return replace(self, exo=self.exo.scaled(alpha), human=self.human.scaled(alpha),
                       friction=tuple(f * alpha for f in self.friction))

    def limits(self) -> np.ndarray:
        return np.array([self.hip_limits, self.knee_limits, self.hip_limits, self.knee_limits])

    def leg_lengths(self) -> np.ndarray:
        """``[[thigh_r, shank_r], [thigh_l, shank_l]]`` lengths, m."""
        return np.array([[t.length, s.length] for t, s in self.exo.legs()])


@dataclass
class PlantState:
    """Kinematic state of the trunk and the four leg joints."""

    t: float = 0.0
    gamma: float = 0.0
    gamma_dot: float = 0.0
    gamma_ddot: float = 0.0
    accel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    q: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    q_dot: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    q_ddot: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))

    def __post_init__(self):
        self.accel = np.asarray(self.accel, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.q_dot = np.asarray(self.q_dot, dtype=float)
        self.q_ddot = np.asarray(self.q_ddot, dtype=float)

    def check(self) -> None:
        if self.accel.shape[-1:] != (2,):
            raise InvalidStateError("invalid state: accel must have 2 components")
        for name in ("q", "q_dot", "q_ddot"):
            if getattr(self, name).shape[-1:] != (N_JOINTS,):
                raise InvalidStateError(f"invalid state: {name} must have 4 components")
        parts = (self.t, self.gamma, self.gamma_dot, self.gamma_ddot,
                 self.accel, self.q, self.q_dot, self.q_ddot)
        try:
            finite = all(np.all(np.isfinite(p)) for p in parts)
        except TypeError:
            finite = False
        if not finite:
            raise InvalidStateError("invalid state: non-finite entry")

    def copy(self) -> "PlantState":
        return PlantState(self.t, self.gamma, self.gamma_dot, self.gamma_ddot,
                          self.accel.copy(), self.q.copy(), self.q_dot.copy(), self.q_ddot.copy())


def _leg_terms(sin, cos, thigh, shank, g, gamma, gamma_dot, accel_x, accel_z, qh, qk, qh_dot, qk_dot):
    """Mass matrix, bias and trunk-coupling terms of one leg in joint coordinates.

    Returns ``(m11, m12, m22, b1, b2, c1, c2)`` such that the joint torques
    (before friction) are ``M @ q_ddot + b + c * gamma_ddot``.
    """
    m1, c1, i1, l1 = thigh.mass, thigh.com, thigh.inertia, thigh.length
    m2, c2, i2 = shank.mass, shank.com, shank.inertia
    a1 = gamma + qh
    a2 = a1 + qk
    w1 = gamma_dot + qh_dot
    w2 = w1 + qk_dot
    k = m2 * l1 * c2
    cd = cos(qk)  # cos(a1 - a2)
    sd = sin(qk)  # sin(a2 - a1)
    # absolute-angle inertia matrix
    A11 = i1 + m1 * c1 * c1 + m2 * l1 * l1
    A12 = k * cd
    A22 = i2 + m2 * c2 * c2
    # velocity-product and effective-gravity terms in absolute angles
    gz = g + accel_z
    h1 = -k * sd * w2 * w2 + (m1 * c1 + m2 * l1) * (accel_x * cos(a1) + gz * sin(a1))
    h2 = k * sd * w1 * w1 + m2 * c2 * (accel_x * cos(a2) + gz * sin(a2))
    # joint coordinates: tau_knee = Q2, tau_hip = Q1 + Q2
    m11 = A11 + 2.0 * A12 + A22
    m12 = A12 + A22
    m22 = A22
    b1 = h1 + h2
    b2 = h2
    cc1 = A11 + 2.0 * A12 + A22
    cc2 = A12 + A22
    return m11, m12, m22, b1, b2, cc1, cc2


def gamma_torques(model: PlantModel, state: PlantState) -> np.ndarray:
    """Generalized joint torques realising the state's accelerations.

    Works on single states (``q`` of shape ``(4,)``) and on batches
    (``q`` of shape ``(n, 4)`` with matching trunk arrays).
    """
    state.check()
    body = model.body
    q, qd, qdd = state.q, state.q_dot, state.q_ddot
    ax, az = state.accel[..., 0], state.accel[..., 1]
    out = np.empty(np.broadcast_shapes(q.shape, qd.shape, qdd.shape))
    for leg, (thigh, shank) in enumerate(body.legs()):
        h, k = 2 * leg, 2 * leg + 1
        m11, m12, m22, b1, b2, c1, c2 = _leg_terms(
            np.sin, np.cos, thigh, shank, model.gravity, state.gamma, state.gamma_dot,
            ax, az, q[..., h], q[..., k], qd[..., h], qd[..., k])
        out[..., h] = m11 * qdd[..., h] + m12 * qdd[..., k] + b1 + c1 * state.gamma_ddot
        out[..., k] = m12 * qdd[..., h] + m22 * qdd[..., k] + b2 + c2 * state.gamma_ddot
    return out + np.asarray(model.friction) * qd


def estimate_interaction_torque(model: PlantModel, state: PlantState, u_E) -> np.ndarray:
    """Interaction torque as the model torque minus the applied motor torque."""
    return gamma_torques(model, state) - np.asarray(u_E, dtype=float)


def forward_accelerations(model: PlantModel, state: PlantState, torque,
                          locked: Optional[Sequence[bool]] = None) -> np.ndarray:
    """Joint accelerations produced by ``torque`` at the state's positions and rates.

    ``locked`` joints are held at zero acceleration (their reaction torque is
    whatever the constraint needs).
    """
    body = model.body
    q, qd = state.q, state.q_dot
    ax, az = float(state.accel[0]), float(state.accel[1])
    tau = [float(torque[j]) - model.friction[j] * float(qd[j]) for j in range(N_JOINTS)]
    out = [0.0] * N_JOINTS
    for leg, (thigh, shank) in enumerate(body.legs()):
        h, k = 2 * leg, 2 * leg + 1
        m11, m12, m22, b1, b2, c1, c2 = _leg_terms(
            math.sin, math.cos, thigh, shank, model.gravity, state.gamma, state.gamma_dot,
            ax, az, float(q[h]), float(q[k]), float(qd[h]), float(qd[k]))
        r1 = tau[h] - b1 - c1 * state.gamma_ddot
        r2 = tau[k] - b2 - c2 * state.gamma_ddot
        lock_h = bool(locked[h]) if locked is not None else False
        lock_k = bool(locked[k]) if locked is not None else False
        if lock_h and lock_k:
            continue
        if lock_h:
            out[k] = r2 / m22
        elif lock_k:
            out[h] = r1 / m11
        else:
            det = m11 * m22 - m12 * m12
            out[h] = (m22 * r1 - m12 * r2) / det
            out[k] = (m11 * r2 - m12 * r1) / det
    return np.array(out)


TrunkProfile = Callable[[float], tuple]


def step_plant(model: PlantModel, state: PlantState, u_E, u_H, dt: float,
               trunk: Optional[TrunkProfile] = None, u_ext=None,
               locked: Optional[Sequence[bool]] = None,
               check_limits: bool = True) -> PlantState:
    """Advance the leg joints by one semi-implicit Euler step.

    The returned state carries ``q_ddot`` evaluated at the *old* state under
    the applied torques, i.e. the acceleration that moved the legs during
    this step, and the trunk values of ``trunk(t + dt)``; without a profile
    the trunk keeps its rates and acceleration.
    """
    if not 0.0 < dt <= 0.02:
        raise ValueError(f"dt must lie in (0, 0.02] s, got {dt}")
    u = np.asarray(u_E, dtype=float) + np.asarray(u_H, dtype=float)
    if u_ext is not None:
        u = u + np.asarray(u_ext, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidStateError("invalid state: non-finite torque")
    qdd = forward_accelerations(model, state, u, locked)
    qd = state.q_dot + dt * qdd
    q = state.q + dt * qd
    t = state.t + dt
    if trunk is None:
        gd = state.gamma_dot + dt * state.gamma_ddot
        new = PlantState(t, state.gamma + dt * gd, gd, state.gamma_ddot,
                         state.accel.copy(), q, qd, qdd)
    else:
        g, gd, gdd, acc = trunk(t)
        new = PlantState(t, g, gd, gdd, np.asarray(acc, dtype=float), q, qd, qdd)
    if check_limits:
        lim = model.limits()
        bad = np.nonzero((q < lim[:, 0]) | (q > lim[:, 1]))[0]
        if bad.size:
            j = int(bad[0])
            raise JointLimitError(j, t, float(q[j]))
    return new


def clamp_torque(model: PlantModel, u) -> np.ndarray:
    """Saturate a motor command at the actuator limit (plant input boundary)."""
    return np.clip(np.asarray(u, dtype=float), -model.torque_limit, model.torque_limit)


def leg_energy(model: PlantModel, state: PlantState) -> float:
    """Kinetic plus gravitational potential energy of both legs, trunk at rest.

    Valid for a stationary hip point; used for work-energy checks.
    """
    g = model.gravity
    total = 0.0
    for leg, (thigh, shank) in enumerate(model.body.legs()):
        a1 = state.gamma + state.q[2 * leg]
        a2 = a1 + state.q[2 * leg + 1]
        w1 = state.gamma_dot + state.q_dot[2 * leg]
        w2 = w1 + state.q_dot[2 * leg + 1]
        # thigh com velocity and height
        v1 = thigh.com * w1
        y1 = -thigh.com * math.cos(a1)
        # shank com velocity: knee velocity + rotation
        vkx = thigh.length * math.cos(a1) * w1
        vky = thigh.length * math.sin(a1) * w1
        vx = vkx + shank.com * math.cos(a2) * w2
        vy = vky + shank.com * math.sin(a2) * w2
        y2 = -thigh.length * math.cos(a1) - shank.com * math.cos(a2)
        total += 0.5 * thigh.mass * v1 * v1 + 0.5 * thigh.inertia * w1 * w1
        total += 0.5 * shank.mass * (vx * vx + vy * vy) + 0.5 * shank.inertia * w2 * w2
        total += g * (thigh.mass * y1 + shank.mass * y2)
    return total
