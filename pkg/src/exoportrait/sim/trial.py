"""One simulated controller block: closed loop plus every sensor stream."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ..config import config_hash, model_to_dict
from ..controllers.amtc import AmtcState
from ..controllers.ksc import KscParams, default_ksc_path
from ..controllers.lookup import TorqueLookup, default_lookup_path
from ..controllers.runtime import AMTC, HTC, TBC, Controller
from ..dynamics import PlantModel, estimate_interaction_torque
from ..gait import SPEEDS, NominalGait
from .human import HumanPolicy, SimulatedHuman
from .loop import run_loop
from .sensors import EMG_RATE, GRF_RATE, synth_breaths, synth_emg, synth_grf

CONTROLLERS = ("TBC", "HTC", "AMTC", "NONE")
PROTOCOL = ((0.4, 100.0), (0.6, 100.0), (0.8, 100.0))

# storage resolution of every stream; trials are quantised to it on creation
# so that a written and re-read trial is bit-identical to the original
RESOLUTION = {
    "t": 1e-6, "q": 1e-7, "q_dot": 1e-6, "q_ddot": 1e-5, "gamma": 1e-7,
    "gamma_dot": 1e-6, "gamma_ddot": 1e-5, "accel": 1e-6, "torque": 1e-6,
    "phase": 1e-7, "speed": 1e-6, "grf": 1e-4, "emg": 1e-7, "vo2": 1e-6,
}


def quantise(x, step: float) -> np.ndarray:
    return np.rint(np.asarray(x, dtype=float) / step) * step


def policy_to_dict(policy: HumanPolicy) -> dict:
    d = asdict(policy)
    if policy.trajectory is not None:
        d["trajectory"] = np.asarray(policy.trajectory).tolist()
    return d


def policy_from_dict(d: dict) -> HumanPolicy:
    d = dict(d)
    for k in ("kp", "kd", "damping"):
        if k in d:
            d[k] = tuple(float(x) for x in d[k])
    if d.get("trajectory") is not None:
        d["trajectory"] = np.asarray(d["trajectory"], dtype=float)
    return HumanPolicy(**d)


@dataclass(frozen=True)
class TrialConfig:
    """Specification of one simulated block.

    ``controller`` ``NONE`` simulates walking without the exoskeleton
    (human-only plant, the wearer carrying its whole limb dynamics), used
    for the natural-walking references.
    """

    controller: str = "TBC"
    schedule: tuple = PROTOCOL
    policy: HumanPolicy = field(default_factory=HumanPolicy)
    seed: int = 0
    control_rate: int = 200
    grf_rate: int = GRF_RATE
    emg_rate: int = EMG_RATE
    breath_spacing: tuple = (3.0, 5.0)
    emg: bool = True
    gain_jitter: float = 0.1
    body_mass: float = 75.0
    exo_mass: float = 17.0
    htc_w: float = 0.5
    amtc_harmonics: int = 5
    amtc_epsilon: float = 0.5
    amtc_r0_speed: float = 0.6
    amtc_dc: bool = True
    amtc_guard: float = 1.5
    amtc_rate_cutoff: float = 5.0
    subject: str = "S0"

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}")
        if not self.schedule or any(d <= 0 for _, d in self.schedule):
            raise ValueError("schedule durations must be positive")
        if any(v <= 0 for v, _ in self.schedule):
            raise ValueError("schedule speeds must be positive")
        if self.control_rate <= 0 or self.grf_rate <= 0 or self.emg_rate <= 0:
            raise ValueError("sample rates must be positive")
        if not 0.0 <= self.gain_jitter < 1.0:
            raise ValueError("gain_jitter must lie in [0, 1)")

    @property
    def duration(self) -> float:
        return float(sum(d for _, d in self.schedule))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = policy_to_dict(self.policy)
        d["schedule"] = [list(map(float, s)) for s in self.schedule]
        d["breath_spacing"] = list(self.breath_spacing)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialConfig":
        d = dict(d)
        d["policy"] = policy_from_dict(d.get("policy", {}))
        d["schedule"] = tuple((float(v), float(t)) for v, t in d.get("schedule", PROTOCOL))
        if "breath_spacing" in d:
            d["breath_spacing"] = tuple(d["breath_spacing"])
        return cls(**d)

    def speed_at(self, t) -> np.ndarray:
        bounds = np.cumsum([d for _, d in self.schedule])
        i = np.searchsorted(bounds, np.asarray(t), side="right")
        speeds = np.array([v for v, _ in self.schedule] + [self.schedule[-1][0]])
        return speeds[np.minimum(i, len(self.schedule) - 1)]


@dataclass
class GaitTrial:
    """A multi-rate recording of one controller block.

    Kinematic-rate arrays share ``t``; GRF and EMG carry their own clocks.
    ``u_int`` is absent for walking without the exoskeleton; ``u_H`` and
    ``phase`` are simulator ground truth and absent from recorded data.
    """

    meta: dict
    t: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    gamma_ddot: np.ndarray
    accel: np.ndarray
    u_E: np.ndarray
    u_int: Optional[np.ndarray]
    speed: np.ndarray
    grf_t: np.ndarray
    grf: np.ndarray
    emg_t: Optional[np.ndarray]
    emg: Optional[np.ndarray]
    breath_t: np.ndarray
    breath_eta: np.ndarray
    events: list  # (leg, time) heel strikes known to the simulator
    u_H: Optional[np.ndarray] = None
    phase: Optional[np.ndarray] = None

    @property
    def controller(self) -> str:
        return self.meta["controller"]

    @property
    def subject(self) -> str:
        return self.meta.get("subject", "S0")

    @property
    def schedule(self) -> list:
        return [tuple(s) for s in self.meta["schedule"]]

    def segments(self) -> list:
        """``(speed, start, end)`` of every schedule segment, s."""
        out, start = [], 0.0
        for v, d in self.schedule:
            out.append((float(v), start, start + float(d)))
            start += float(d)
        return out

    @property
    def has_emg(self) -> bool:
        return self.emg is not None

    def strides(self) -> list:
        """Ground-truth strides between consecutive right heel strikes."""
        from ..sigproc import segment_strides

        right = [t for leg, t in self.events if leg == "right"]
        return segment_strides(right)


def seeded_policy(policy: HumanPolicy, seed: int, jitter: float) -> HumanPolicy:
    """Wearer variant for one seed: PD gains scaled by ``U(1 - jitter, 1 + jitter)``."""
    if jitter == 0:
        return policy
    rng = np.random.default_rng([seed, 0])
    f = rng.uniform(1 - jitter, 1 + jitter, 2)
    return replace(policy, kp=tuple(float(k * f[0]) for k in policy.kp),
                   kd=tuple(float(k * f[1]) for k in policy.kd))


def natural_policy(policy: HumanPolicy) -> HumanPolicy:
    """The same wearer walking without the device: fully engaged, own timing."""
    return replace(policy, kind="leader", engagement=1.0, feedforward=1.0, phase_offset=0.0)


def load_default_lookup() -> TorqueLookup:
    return TorqueLookup.load(default_lookup_path())


def load_default_ksc() -> KscParams:
    return KscParams.load(default_ksc_path())


def make_controller(config: TrialConfig, model: PlantModel, gait: NominalGait,
                    lookup: Optional[TorqueLookup] = None, ksc: Optional[KscParams] = None,
                    amtc: Optional[AmtcState] = None) -> Controller:
    dt = 1.0 / config.control_rate
    v0 = config.schedule[0][0]
    name = config.controller
    if name == "NONE":
        return Controller()
    if name in ("TBC", "HTC") and lookup is None:
        lookup = load_default_lookup()
    if name == "TBC":
        return TBC(model, gait, lookup, {v: gait.stride_time(v) for v in SPEEDS}, initial_speed=v0)
    if name == "HTC":
        return HTC(model, gait, lookup, ksc if ksc is not None else load_default_ksc(),
                   w=config.htc_w, dt=dt, initial_speed=v0)
    if amtc is None:
        amtc = AmtcState.initial(gait.joint_coefficients(config.amtc_r0_speed),
                                 m=config.amtc_harmonics, epsilon=config.amtc_epsilon,
                                 dc=config.amtc_dc, guard=config.amtc_guard)
    return AMTC(model, gait, amtc, dt=dt, initial_speed=v0, rate_cutoff=config.amtc_rate_cutoff)


def trial_meta(config: TrialConfig, model: PlantModel) -> dict:
    cfg = config.to_dict()
    model_id = config_hash(model_to_dict(model))
    return {
        "controller": config.controller,
        "subject": config.subject,
        "seed": config.seed,
        "schedule": cfg["schedule"],
        "policy_kind": config.policy.kind,
        "model_id": model_id,
        "config_hash": config_hash({"trial": cfg, "model": model_id}),
        "trial_config": cfg,
    }


def run_trial(config: TrialConfig, model: Optional[PlantModel] = None,
              lookup: Optional[TorqueLookup] = None, ksc: Optional[KscParams] = None,
              gait: Optional[NominalGait] = None, amtc: Optional[AmtcState] = None,
              controller: Optional[Controller] = None) -> GaitTrial:
    """Simulate one block and synthesise its sensor streams.

    ``model`` is the controller's (and the interaction estimate's) plant
    model; the simulated plant is the same model with the wearer's segments
    attached.  Raises ``TrialAbortedError`` with the time and cause when the
    plant leaves its valid range.
    """
    model = model or PlantModel()
    gait = gait or NominalGait.default()
    policy = seeded_policy(config.policy, config.seed, config.gain_jitter)
    exo = config.controller != "NONE"
    if exo:
        plant = model.with_human()
    else:
        plant = model.human_only()
        policy = natural_policy(policy)
    ctrl = controller or make_controller(config, model, gait, lookup, ksc, amtc)
    human = SimulatedHuman(policy, plant, gait, config.schedule, feedforward_model=model)
    dt = 1.0 / config.control_rate
    rec = run_loop(plant, ctrl, human, config.duration, dt=dt)

    R = RESOLUTION
    t = quantise(np.arange(len(rec.t)) * (1.0 / config.control_rate), R["t"])
    u_int = estimate_interaction_torque(model, rec.state(), rec.u_E) if exo else None
    speed = config.speed_at(rec.t)
    mass = config.body_mass + (config.exo_mass if exo else 0.0)
    grf_t, grf = synth_grf(rec.phase_human, rec.t, config.seed, mass * model.gravity,
                           duration=config.duration, rate=config.grf_rate)
    emg_t = emg = None
    if config.emg:
        emg_t, emg = synth_emg(rec.u_H, rec.phase_human, config.seed, t=rec.t,
                               rate=config.emg_rate, duration=config.duration)
        emg_t = quantise(emg_t, R["t"])
        emg = quantise(emg, R["emg"])
    bt, eta = synth_breaths(rec.u_H, rec.t, speed, config.seed,
                            spacing=config.breath_spacing, dt=dt)
    return GaitTrial(
        meta=trial_meta(config, model),
        t=t, q=quantise(rec.q, R["q"]), q_dot=quantise(rec.q_dot, R["q_dot"]),
        q_ddot=quantise(rec.q_ddot, R["q_ddot"]), gamma=quantise(rec.gamma, R["gamma"]),
        gamma_dot=quantise(rec.gamma_dot, R["gamma_dot"]),
        gamma_ddot=quantise(rec.gamma_ddot, R["gamma_ddot"]),
        accel=quantise(rec.accel, R["accel"]), u_E=quantise(rec.u_E, R["torque"]),
        u_int=None if u_int is None else quantise(u_int, R["torque"]),
        speed=quantise(speed, R["speed"]),
        grf_t=quantise(grf_t, R["t"]), grf=quantise(grf, R["grf"]),
        emg_t=emg_t, emg=emg,
        breath_t=quantise(bt, R["t"]), breath_eta=quantise(eta, R["vo2"]),
        events=[(leg, float(quantise(te, R["t"]))) for leg, te in rec.events],
        u_H=quantise(rec.u_H, R["torque"]), phase=quantise(rec.phase_human, R["phase"]),
    )


def expected_strides(config: TrialConfig, gait: Optional[NominalGait] = None) -> float:
    """Stride count implied by the natural stride time of each segment."""
    gait = gait or NominalGait.default()
    return sum(d / config.policy.stride_time(gait, v) for v, d in config.schedule)

