import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exoportrait.dynamics import (
    BodySegments,
    InvalidStateError,
    JointLimitError,
    PlantModel,
    PlantState,
    Segment,
    estimate_interaction_torque,
    gamma_torques,
    leg_energy,
    step_plant,
)

from oracles import static_hip_knee_torques


def two_mass_model(thigh_mass=3.0, thigh_com=0.2, shank_mass=2.0, shank_com=0.25,
                   thigh_len=0.45, shank_len=0.45):
    thigh = Segment(thigh_mass, thigh_len, thigh_com, 0.05)
    shank = Segment(shank_mass, shank_len, shank_com, 0.03)
    trunk = Segment(10.0, 0.5, 0.2, 0.5)
    body = BodySegments(trunk, thigh, shank, thigh, shank)
    return PlantModel(exo=body, human=body, friction=(0.0,) * 4)


def random_state(rng, batch=None):
    shape = (4,) if batch is None else (batch, 4)
    tshape = () if batch is None else (batch,)
    q = rng.uniform([-0.5, -2.0, -0.5, -2.0], [2.0, 0.0, 2.0, 0.0], size=shape)
    return PlantState(t=0.0, gamma=rng.uniform(-0.3, 0.3, tshape),
                      gamma_dot=rng.normal(0, 1, tshape), gamma_ddot=rng.normal(0, 3, tshape),
                      accel=rng.normal(0, 2, tshape + (2,)), q=q,
                      q_dot=rng.normal(0, 3, shape), q_ddot=rng.normal(0, 20, shape))


def test_static_standing_needs_no_torque(model):
    assert np.all(gamma_torques(model, PlantState()) == 0.0)


def test_flexed_hip_static_equilibrium():
    m = two_mass_model()
    state = PlantState(q=[math.pi / 2, -math.pi / 2, 0.0, 0.0])
    tau = gamma_torques(m, state)
    hip, knee = static_hip_knee_torques(3.0, 0.2, 0.45, 2.0, 0.25, math.pi / 2, -math.pi / 2)
    # weights pull the flexed thigh down; the joint must supply the opposite moment
    gravity_moment = -(3 * 9.81 * 0.2) * math.sin(math.pi / 2) - 2 * 9.81 * 0.45
    assert hip == pytest.approx(-gravity_moment, abs=1e-12)
    assert tau[0] == pytest.approx(14.715, abs=1e-9)  # frozen: 9.81 * (0.6 + 0.9)
    assert tau[0] == pytest.approx(hip, abs=1e-9)
    assert tau[1] == pytest.approx(knee, abs=1e-9)
    assert abs(tau[1]) < 1e-12  # shank hangs plumb below the knee
    assert np.all(tau[2:] == 0.0)


@pytest.mark.parametrize("q", [[0.3, -0.8, -0.2, -0.1], [1.2, -1.9, 0.5, -0.4], [-0.4, 0.0, 1.0, -2.0]])
@pytest.mark.parametrize("gamma", [0.0, 0.15])
def test_gravity_torques_match_static_oracle(q, gamma):
    m = two_mass_model()
    tau = gamma_torques(m, PlantState(gamma=gamma, q=q))
    for leg in range(2):
        hip, knee = static_hip_knee_torques(3.0, 0.2, 0.45, 2.0, 0.25, q[2 * leg], q[2 * leg + 1],
                                            gamma)
        assert tau[2 * leg] == pytest.approx(hip, abs=1e-10)
        assert tau[2 * leg + 1] == pytest.approx(knee, abs=1e-10)


def test_doubling_inertial_parameters_doubles_torques(model, rng):
    state = random_state(rng)
    assert np.allclose(gamma_torques(model.scaled(2.0), state), 2 * gamma_torques(model, state),
                       rtol=1e-12, atol=1e-12)


def test_interaction_torque_identities(model, rng):
    state = random_state(rng)
    gam = gamma_torques(model, state)
    assert np.all(estimate_interaction_torque(model, state, gam) == 0.0)
    assert np.array_equal(estimate_interaction_torque(model, state, np.zeros(4)), gam)
    u = estimate_interaction_torque(model, PlantState(), [1.0, 0.0, 0.0, 0.0])
    assert np.array_equal(u, [-1.0, 0.0, 0.0, 0.0])


def test_batched_evaluation_matches_single_states(model, rng):
    batch = random_state(rng, batch=20)
    out = gamma_torques(model, batch)
    for i in range(20):
        single = PlantState(0.0, batch.gamma[i], batch.gamma_dot[i], batch.gamma_ddot[i],
                            batch.accel[i], batch.q[i], batch.q_dot[i], batch.q_ddot[i])
        assert np.allclose(out[i], gamma_torques(model, single), rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("field,value", [("q", [0, np.nan, 0, 0]), ("gamma", np.inf),
                                         ("q_dot", [0, 0, 0])])
def test_invalid_state_is_rejected(model, field, value):
    state = PlantState()
    setattr(state, field, np.asarray(value, dtype=float))
    with pytest.raises(InvalidStateError, match="invalid state"):
        gamma_torques(model, state)


def test_segment_parameters_must_be_positive():
    with pytest.raises(ValueError):
        Segment(0.0, 0.4, 0.2, 0.1)
    with pytest.raises(ValueError):
        PlantModel(friction=(0.5, -0.1, 0.5, 0.5))


def test_step_without_forces_is_an_equilibrium():
    m = PlantModel(gravity=0.0)
    s0 = PlantState(q=[0.3, -0.5, 0.1, -0.2])
    s1 = step_plant(m, s0, np.zeros(4), np.zeros(4), 0.005)
    assert np.array_equal(s1.q, s0.q)
    assert np.array_equal(s1.q_dot, s0.q_dot)


@pytest.mark.parametrize("joint", [0, 1])
def test_constant_torque_single_joint(joint):
    # gravity off, other joints locked: the free joint sees a rigid-body inertia
    thigh = Segment(6.0, 0.43, 0.19, 0.11)
    shank = Segment(3.5, 0.43, 0.24, 0.07)
    body = BodySegments(Segment(30, 0.5, 0.3, 1.0), thigh, shank, thigh, shank)
    m = PlantModel(exo=body, human=body, friction=(0.0,) * 4, gravity=0.0)
    qk = -0.6
    if joint == 0:
        d2 = thigh.length ** 2 + shank.com ** 2 + 2 * thigh.length * shank.com * math.cos(qk)
        inertia = thigh.inertia + thigh.mass * thigh.com ** 2 + shank.inertia + shank.mass * d2
    else:
        inertia = shank.inertia + shank.mass * shank.com ** 2
    tau, dt = 2.0, 1e-3
    u = np.zeros(4)
    u[joint] = tau
    locked = [j != joint for j in range(4)]
    s = PlantState(q=[0.2, qk, 0.0, -0.3])
    s1 = step_plant(m, s, u, np.zeros(4), dt, locked=locked)
    expected = tau / inertia * dt * dt  # semi-implicit Euler from rest
    assert s1.q[joint] - s.q[joint] == pytest.approx(expected, rel=1e-12)
    assert np.all(np.delete(s1.q - s.q, joint) == 0.0)


def test_work_energy_balance_without_friction():
    m = PlantModel(friction=(0.0,) * 4)
    s = PlantState(q=[0.5, -0.9, -0.2, -0.7], q_dot=[1.0, -2.0, 0.5, 1.0])
    u_E = np.array([3.0, -2.0, 1.0, 0.5])
    u_H = np.array([0.5, 0.5, -1.0, 0.0])
    dt = 1e-5
    s1 = step_plant(m, s, u_E, u_H, dt)
    work = (u_E + u_H) @ s.q_dot * dt
    assert leg_energy(m, s1) - leg_energy(m, s) == pytest.approx(work, rel=1e-3)


def test_integrator_is_first_order():
    m = PlantModel(friction=(0.0,) * 4)
    q0 = [0.6, -0.5, -0.3, -0.1]
    knees_locked = [False, True, False, True]  # an unlocked double pendulum reaches the knee stop

    def swing(dt, duration=1.0):
        s = PlantState(q=q0)
        for _ in range(int(round(duration / dt))):
            s = step_plant(m, s, np.zeros(4), np.zeros(4), dt, locked=knees_locked)
        return np.concatenate([s.q, s.q_dot])

    ref = swing(1e-5)
    errs = [np.abs(swing(dt) - ref).max() for dt in (2e-3, 1e-3, 5e-4)]
    assert errs[0] / errs[1] >= 1.9
    assert errs[1] / errs[2] >= 1.9


def test_step_rejects_bad_dt_and_reports_joint_limits():
    m = PlantModel()
    with pytest.raises(ValueError):
        step_plant(m, PlantState(), np.zeros(4), np.zeros(4), 0.05)
    s = PlantState(q=[2.099, -0.5, 0.0, -0.5], q_dot=[5.0, 0, 0, 0])
    with pytest.raises(JointLimitError) as exc:
        step_plant(m, s, np.zeros(4), np.zeros(4), 0.005)
    assert "hip_right" in str(exc.value)


def test_determinism(model, rng):
    state = random_state(rng)
    a = step_plant(model.with_human(), state, np.ones(4), np.ones(4), 0.005, check_limits=False)
    b = step_plant(model.with_human(), state, np.ones(4), np.ones(4), 0.005, check_limits=False)
    assert a.q.tobytes() == b.q.tobytes() and a.q_dot.tobytes() == b.q_dot.tobytes()


finite = st.floats(-3, 3, allow_nan=False)
vec4 = st.lists(finite, min_size=4, max_size=4)


@settings(max_examples=60, deadline=None)
@given(q=vec4, qd=vec4, qdd=vec4, gamma=st.floats(-0.5, 0.5), alpha=st.floats(0.1, 10))
def test_cancellation_and_homogeneity(q, qd, qdd, gamma, alpha):
    m = PlantModel()
    state = PlantState(gamma=gamma, q=q, q_dot=qd, q_ddot=qdd)
    g = gamma_torques(m, state)
    assert np.max(np.abs(estimate_interaction_torque(m, state, g))) == 0.0
    assert np.allclose(gamma_torques(m.scaled(alpha), state), alpha * g, rtol=1e-10, atol=1e-9)
