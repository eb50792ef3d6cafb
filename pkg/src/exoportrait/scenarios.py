"""Scripted wearer scenarios with known interaction-portrait outcomes, and the
three-controller protocol.

Each quadrant scenario is a pair of blocks under the same controller at
0.6 m/s whose wearers differ in one behaviour:

* ``Q1`` a leader starts tracking a trajectory shifted out of step, which
  raises both interaction torque and effort;
* ``Q2`` a leader additionally drives its own limb dynamics, taking over the
  work done by the device's table;
* ``Q3`` a strongly out-of-step wearer moves closer to the device's timing;
* ``Q4`` a leader lets its engagement fade and is carried by the device.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

from .dynamics import PlantModel
from .sim.human import HumanPolicy
from .sim.trial import PROTOCOL, GaitTrial, TrialConfig, run_trial

SCENARIO_SPEED = 0.6
SCENARIO_DURATION = 30.0

# leader with a personal style, tracking half of its own limb dynamics
LEADER = dict(feedforward=0.5, hip_gain=0.2, knee_gain=0.2)


def leader() -> HumanPolicy:
    return HumanPolicy.of_kind("leader", **LEADER)


def conflicting(offset: float) -> HumanPolicy:
    return HumanPolicy.of_kind("conflicting", phase_offset=offset, **LEADER)


def yielding() -> HumanPolicy:
    """Leader whose engagement fades to a quarter with a 5 s time constant."""
    return HumanPolicy.of_kind("yielding", yield_tau=5.0, yield_floor=0.25, **LEADER)


def quadrant_pairs() -> Dict[int, Tuple[HumanPolicy, HumanPolicy]]:
    """``{quadrant: (baseline policy, modified policy)}``."""
    return {
        1: (leader(), conflicting(0.6)),
        2: (leader(), replace(leader(), feedforward=1.0)),
        3: (conflicting(1.0), conflicting(0.3)),
        4: (leader(), yielding()),
    }


def ordering_policies() -> Dict[str, HumanPolicy]:
    """Follower, leader and quarter-stride conflicting wearers."""
    return {"follower": HumanPolicy.of_kind("follower"),
            "leader": leader(),
            "conflicting": conflicting(math.pi / 2)}


def block_config(policy: HumanPolicy, seed: int, controller: str = "TBC",
                 speed: float = SCENARIO_SPEED, duration: float = SCENARIO_DURATION,
                 subject: Optional[str] = None, **kw) -> TrialConfig:
    return TrialConfig(controller=controller, schedule=((speed, duration),), policy=policy,
                       seed=seed, subject=subject or f"seed{seed}", **kw)


def _run(args):
    cfg, label, model = args
    trial = run_trial(cfg, model)
    trial.meta["condition"] = label
    return trial


def run_many(jobs: Sequence[Tuple[TrialConfig, str]], workers: int = 1,
             model: Optional[PlantModel] = None) -> List[GaitTrial]:
    """Run ``(config, condition label)`` jobs, in parallel when ``workers > 1``.

    Results are returned in job order, so the output does not depend on
    ``workers``.
    """
    jobs = [(c, label, model) for c, label in jobs]
    if workers <= 1 or len(jobs) < 2:
        return [_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run, jobs))


def quadrant_jobs(quadrant: int, seed: int, **kw):
    base, mod = quadrant_pairs()[quadrant]
    subject = f"Q{quadrant}-seed{seed}"
    return [(block_config(base, seed, subject=subject, **kw), "baseline"),
            (block_config(mod, seed, subject=subject, **kw), "modified")]


def ordering_jobs(seed: int, **kw):
    subject = f"seed{seed}"
    jobs = [(block_config(p, seed, subject=subject, **kw), name)
            for name, p in ordering_policies().items()]
    jobs.append((block_config(leader(), seed, controller="AMTC", subject=subject, **kw),
                 "leader-AMTC"))
    return jobs


def protocol_jobs(seed: int = 0, policy: Optional[HumanPolicy] = None,
                  schedule=PROTOCOL, controllers=("TBC", "HTC", "AMTC"), natural: bool = True,
                  subject: str = "S0", **kw):
    """One subject's experiment: every controller over the speed schedule,
    plus a natural-walking block for the baselines."""
    policy = policy or leader()
    names = list(controllers) + (["NONE"] if natural else [])
    return [(TrialConfig(controller=c, schedule=tuple(schedule), policy=policy, seed=seed,
                         subject=subject, **kw), c) for c in names]
