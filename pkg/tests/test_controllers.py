import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exoportrait.calibration import ksc_training_set, relative_rms
from exoportrait.controllers.amtc import (
    AdaptationDivergedError,
    AmtcState,
    amtc_adapt,
    amtc_reference,
    amtc_torque,
    basis,
)
from exoportrait.controllers.ksc import DimensionError, KscParams, ksc_torque
from exoportrait.controllers.lookup import EmptyTableError, TorqueLookup, tbc_torque
from exoportrait.controllers.phase import (
    KinematicPhaseEstimator,
    PhaseUndefinedError,
    SpeedUnavailableError,
    classify_speed,
    phase_kinematic,
    phase_time,
    speed_estimate,
)
from exoportrait.controllers.runtime import htc_torque
from exoportrait.dynamics import PlantState, gamma_torques
from exoportrait.gait import LEG_LENGTHS
from exoportrait.sim.trial import load_default_ksc, load_default_lookup


# --- time-based phase -------------------------------------------------------

def test_phase_time_examples():
    assert phase_time(2.5, 1.2) == pytest.approx(0.1 / 1.2, abs=1e-12)
    assert phase_time(0.0, 1.2) == 0.0
    for k in range(6):
        assert phase_time(k * 1.25, 1.25) == 0.0  # exactly representable period
    with pytest.raises(ValueError):
        phase_time(1.0, 0.0)


@given(t=st.floats(0, 1e4), T=st.floats(0.3, 3.0))
def test_phase_time_periodicity(t, T):
    a, b = phase_time(t, T), phase_time(t + T, T)
    assert 0.0 <= a < 1.0
    d = abs(a - b)
    assert min(d, 1 - d) < 1e-9


# --- kinematic phase --------------------------------------------------------

def sine_hip_estimator(A, T, dt=0.005):
    coef = np.zeros(11)
    coef[2] = A  # A sin(2 pi phi)
    return KinematicPhaseEstimator(dt, coef, T, calibrate=False, velocity_lead=0.0)


def drive(est, A, T, seconds, dt=0.005, offset=0.1):
    out = []
    for i in range(1, int(round(seconds / dt)) + 1):
        t = i * dt
        q = [offset + A * math.sin(2 * math.pi * t / T), 0, 0, 0]
        qd = [A * 2 * math.pi / T * math.cos(2 * math.pi * t / T), 0.5, 0, 0]
        out.append(phase_kinematic(q, qd, est))
    return np.array(out)


def test_kinematic_phase_advances_uniformly_on_a_sine():
    A, T, dt = 0.4, 1.2, 0.005
    phi = drive(sine_hip_estimator(A, T), A, T, 8 * T)
    tail = phi[int(4 * T / dt):]
    steps = np.diff(tail) % 1.0
    assert np.allclose(steps, dt / T, atol=2e-4)
    wraps = np.nonzero(np.diff(tail) < -0.5)[0]
    assert np.allclose(np.diff(wraps), T / dt, atol=1)


def test_kinematic_phase_is_amplitude_invariant_and_deterministic():
    T = 1.1
    a = drive(sine_hip_estimator(0.3, T), 0.3, T, 6 * T)
    b = drive(sine_hip_estimator(0.3, T), 0.6, T, 6 * T)
    c = drive(sine_hip_estimator(0.3, T), 0.3, T, 6 * T)
    assert np.array_equal(a, c)
    late = slice(int(3 * T / 0.005), None)
    d = np.abs(a[late] - b[late])
    assert np.max(np.minimum(d, 1 - d)) < 1e-3


def test_kinematic_phase_refuses_a_stationary_limb():
    est = sine_hip_estimator(0.3, 1.0)
    with pytest.raises(PhaseUndefinedError, match="stationary"):
        for _ in range(600):
            phase_kinematic(np.zeros(4), np.zeros(4), est)


# --- speed ------------------------------------------------------------------

def straight_leg_history(stride_len, stride_time, n_strides=2, dt=0.005):
    """Stiff-kneed gait whose ankles reach +/- stride_len / 4 at heel strike."""
    leg = sum(LEG_LENGTHS)
    a = math.asin(stride_len / (4 * leg))
    t = np.arange(0, n_strides * stride_time + dt / 2, dt)
    hip_r = a * np.cos(2 * math.pi * t / stride_time)
    q = np.stack([hip_r, 0 * t, -hip_r, 0 * t], axis=1)
    right = [k * stride_time for k in range(n_strides + 1)]
    left = [(k + 0.5) * stride_time for k in range(n_strides)]
    return t, q, right, left


@pytest.mark.parametrize("length,time,cls", [(0.48, 1.2, 0.4), (0.9, 1.125, 0.8), (0.72, 1.2, 0.6)])
def test_speed_classes(length, time, cls):
    t, q, right, left = straight_leg_history(length, time)
    assert speed_estimate(t, q, right, left, LEG_LENGTHS) == cls


def test_speed_tie_goes_to_the_lower_class():
    assert classify_speed(0.5) == 0.4
    assert classify_speed(0.7) == 0.6
    assert classify_speed(0.5000001) == 0.6


def test_speed_needs_a_complete_stride():
    with pytest.raises(SpeedUnavailableError, match="speed unavailable"):
        speed_estimate([0, 1], np.zeros((2, 4)), [0.0], [], LEG_LENGTHS)


# --- lookup, KSC, HTC -------------------------------------------------------

def small_lookup():
    phi = np.arange(4) / 4
    values = np.zeros((3, 4, 4))
    values[:, :, 0] = [[0, 2, 4, 2], [1, 3, 5, 3], [2, 4, 6, 4]]
    return TorqueLookup(phi, np.array([0.4, 0.6, 0.8]), values)


def test_lookup_interpolation():
    lk = small_lookup()
    assert tbc_torque(lk, 0.25, 0.4)[0] == 2.0
    assert tbc_torque(lk, 0.125, 0.4)[0] == 1.0
    assert tbc_torque(lk, 0.875, 0.4)[0] == 1.0  # wraps to the first node
    assert tbc_torque(lk, 0.25, 0.5)[0] == 2.5  # between speeds
    with pytest.raises(EmptyTableError):
        TorqueLookup(np.empty(0), np.array([0.4]), np.empty((1, 0, 4)))


def test_shipped_lookup_is_periodic_and_round_trips(tmp_path):
    lk = load_default_lookup()
    assert list(lk.speeds) == [0.4, 0.6, 0.8]
    for v in lk.speeds:
        gap = np.abs(tbc_torque(lk, 0.999, v) - tbc_torque(lk, 0.0, v)).max()
        assert gap <= lk.max_step()
    lk.save(tmp_path / "lk.csv")
    back = TorqueLookup.load(tmp_path / "lk.csv")
    assert np.allclose(back.values, lk.values, atol=1e-9)


def test_ksc_zero_weights_give_zero_torque(rng):
    p = KscParams.zeros()
    out = ksc_torque(p, rng.normal(size=4), rng.normal(size=4), 0.1)
    assert np.all(out == 0.0)
    with pytest.raises(DimensionError):
        ksc_torque(p, np.zeros(3), np.zeros(4), 0.0)


def test_shipped_ksc_fits_inverse_dynamics(model, gait):
    x, y = ksc_training_set(model, gait)
    pred = ksc_torque(load_default_ksc(), x[:, :4], x[:, 4:8], x[:, 8])
    assert relative_rms(pred, y) < 0.10


def test_ksc_is_locally_continuous(rng):
    p = load_default_ksc()
    for _ in range(50):
        q, qd = rng.uniform(-1, 1, 4), rng.normal(0, 2, 4)
        a = ksc_torque(p, q, qd, 0.05)
        b = ksc_torque(p, q + 1e-6 * rng.standard_normal(4), qd, 0.05)
        assert np.abs(a - b).max() < 1e-3


def test_htc_blend():
    assert np.array_equal(htc_torque([2, 0, 0, 0], [4, 0, 0, 0], 0.5), [3, 0, 0, 0])
    u, g = np.array([1.0, -2, 3, 4]), np.array([0.5, 1, -1, 2])
    assert np.array_equal(htc_torque(u, g, 1.0), u)
    assert np.array_equal(htc_torque(u, g, 0.0), g)
    with pytest.raises(ValueError):
        htc_torque(u, g, 1.5)


@given(w=st.floats(0, 1), a=st.lists(st.floats(-50, 50), min_size=4, max_size=4),
       b=st.lists(st.floats(-50, 50), min_size=4, max_size=4))
def test_htc_output_lies_between_inputs(w, a, b):
    out = htc_torque(a, b, w)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(out >= lo - 1e-9) and np.all(out <= hi + 1e-9)


# --- AMTC -------------------------------------------------------------------

def zero_r0():
    return np.zeros((4, 11))


def test_reference_with_zero_theta_is_the_base_trajectory(gait):
    r0 = gait.joint_coefficients(0.6)
    s = AmtcState.initial(r0)
    for phi in (0.0, 0.3, 0.77):
        r, _, _ = amtc_reference(s, phi)
        assert np.allclose(r, gait.angles(phi, 0.6), atol=1e-12)


def test_pure_cosine_modification():
    s = AmtcState.initial(zero_r0(), m=2)
    s.theta[:, 1] = 1.0
    for phi in (0.0, 0.1, 0.6):
        r, dr, _ = amtc_reference(s, phi)
        assert np.allclose(r, math.cos(2 * math.pi * phi), atol=1e-14)
    _, dr0, _ = amtc_reference(s, 0.0)
    assert np.all(np.abs(dr0) < 1e-14)


def test_reference_derivatives_match_finite_differences(rng, gait):
    s = AmtcState.initial(gait.joint_coefficients(0.4), m=5)
    s.theta = rng.normal(0, 0.1, s.theta.shape)
    rate, h = 0.8, 1e-5
    for phi in rng.uniform(0, 1, 10):
        r, dr, ddr = amtc_reference(s, phi, rate)
        rp, drp, _ = amtc_reference(s, phi + h, rate)
        rm, drm, _ = amtc_reference(s, phi - h, rate)
        assert np.allclose(dr, (rp - rm) / (2 * h) * rate, rtol=1e-6, atol=1e-8)
        assert np.allclose(ddr, (drp - drm) / (2 * h) * rate, rtol=1e-6, atol=1e-6)


def test_adapt_hand_example():
    s = AmtcState.initial(zero_r0(), m=1, epsilon=0.1)
    assert np.array_equal(basis(0.0, 1), [1.0, 1.0, 0.0])
    new = amtc_adapt(s, np.ones(4), 0.0, 1.0)
    assert np.allclose(new.theta - s.theta, -np.array([0.1, 0.1, 0.0]), atol=1e-15)
    same = amtc_adapt(s, np.zeros(4), 0.4, 0.005)
    assert np.array_equal(same.theta, s.theta)


def gradient_check(rng, m):
    r0 = rng.normal(0, 0.3, (4, 11))
    s = AmtcState.initial(r0, m=m, epsilon=rng.uniform(0.1, 2.0, 4))
    s.theta = rng.normal(0, 0.2, s.theta.shape)
    phi = rng.uniform(0, 1)
    q = rng.normal(0, 0.5, 4)
    dt, h = 1e-3, 1e-6
    e = amtc_reference(s, phi)[0] - q
    step = amtc_adapt(s, e, phi, dt).theta - s.theta
    grad = np.zeros_like(s.theta)
    for j in range(4):
        for i in range(s.theta.shape[1]):
            for sign in (1, -1):
                p = s.copy()
                p.theta[j, i] += sign * h
                ej = amtc_reference(p, phi)[0][j] - q[j]
                grad[j, i] += sign * 0.5 * ej * ej / (2 * h)
    expected = -dt * s.epsilon[:, None] * grad
    return np.abs(step - expected).max() / np.abs(expected).max()


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_adapt_descends_the_squared_error(m):
    rng = np.random.default_rng(m)
    for _ in range(5):
        assert gradient_check(rng, m) < 1e-6


def test_adaptation_guard_names_the_joint():
    s = AmtcState.initial(zero_r0(), m=1, epsilon=1.0, guard=1.5)
    with pytest.raises(AdaptationDivergedError) as exc:
        amtc_adapt(s, [0, 0, 2.0, 0], 0.0, 1.0)
    assert exc.value.joint == 2


def test_amtc_torque_on_the_actual_trajectory_is_transparent(model, rng):
    state = PlantState(gamma=0.05, gamma_dot=0.2, q=rng.uniform(-0.5, 0.5, 4) - [0, 0.6, 0, 0.6],
                       q_dot=rng.normal(size=4), q_ddot=rng.normal(size=4), accel=[0.3, -0.2])
    u = amtc_torque(model, state, (state.q, state.q_dot, state.q_ddot))
    assert np.array_equal(u, gamma_torques(model, state))


def test_static_reference_gives_static_torques(model):
    state = PlantState()
    assert np.all(amtc_torque(model, state, (np.zeros(4), np.zeros(4), np.zeros(4))) == 0.0)


@pytest.mark.parametrize("joint", range(4))
def test_reference_perturbation_follows_the_gravity_gradient(model, joint):
    state = PlantState(q=[0.3, -0.5, -0.2, -0.3])
    base = (state.q, np.zeros(4), np.zeros(4))
    delta = 1e-4
    r = state.q.copy()
    r[joint] += delta
    du = amtc_torque(model, state, (r, np.zeros(4), np.zeros(4))) - amtc_torque(model, state, base)
    perturbed = PlantState(q=r)
    dg = gamma_torques(model, perturbed) - gamma_torques(model, state)
    assert np.allclose(du, dg, atol=1e-12)
    other_leg = [2, 3] if joint < 2 else [0, 1]
    assert np.all(du[other_leg] == 0.0)
    same_leg = [0, 1] if joint < 2 else [2, 3]
    assert np.all(np.abs(du[same_leg]) > 0)
