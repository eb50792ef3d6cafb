"""Offline generation of the shipped controller data files.

* The torque lookup is recorded the way such tables are built on hardware:
  a stiff PD controller drives the device along the nominal gait while a
  passive (follower) wearer is strapped in, and the commanded torques are
  averaged per phase bin.
* The KSC parameters are a small network fitted to the model's inverse
  dynamics on the nominal gait.

Run ``python -m exoportrait.calibration`` to regenerate both files.
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .controllers.ksc import default_ksc_path, fit_ksc, ksc_features, ksc_torque
from .controllers.lookup import TorqueLookup, default_lookup_path
from .controllers.runtime import PDTracking
from .dynamics import PlantModel, PlantState, gamma_torques
from .gait import SPEEDS, NominalGait, TrunkMotion
from .sim.human import HumanPolicy, SimulatedHuman
from .sim.loop import run_loop


def nominal_states(gait: NominalGait, speeds=SPEEDS, points: int = 400,
                   trunk: TrunkMotion = TrunkMotion()) -> PlantState:
    """Batched states along the nominal gait at each speed (all phases)."""
    rows = []
    phi = np.arange(points) / points
    for v in speeds:
        T = gait.stride_time(v)
        q = gait.angles(phi, v)
        qd = gait.angles(phi, v, 1) / T
        qdd = gait.angles(phi, v, 2) / T ** 2
        tr = [trunk.at(p, T) for p in phi]
        g = np.array([x[0] for x in tr])
        gd = np.array([x[1] for x in tr])
        gdd = np.array([x[2] for x in tr])
        acc = np.array([x[3] for x in tr])
        rows.append((g, gd, gdd, acc, q, qd, qdd))
    cat = [np.concatenate([r[i] for r in rows]) for i in range(7)]
    return PlantState(0.0, *cat)


def ksc_training_set(model: PlantModel, gait: NominalGait, points: int = 400):
    st = nominal_states(gait, points=points)
    x = ksc_features(st.q, st.q_dot, st.gamma)
    y = gamma_torques(model, st)
    return x, y


def relative_rms(pred, target) -> float:
    return float(np.sqrt(np.mean((pred - target) ** 2)) / np.sqrt(np.mean(target ** 2)))


def build_ksc(model: PlantModel, gait: NominalGait, seed: int = 0, maxiter: int = 4000):
    x, y = ksc_training_set(model, gait)
    params = fit_ksc(x, y, seed=seed, maxiter=maxiter)
    return params, relative_rms(ksc_torque(params, x[:, :4], x[:, 4:8], x[:, 8]), y)


def record_lookup(model: PlantModel, gait: NominalGait, bins: int = 100,
                  duration: float = 30.0, settle: float = 10.0) -> TorqueLookup:
    """Phase-binned mean of stiff PD tracking torques at each speed.

    Bin ``i`` averages phases in ``[i / bins, (i + 1) / bins)`` and is
    stored at its centre.
    """
    plant = model.with_human()
    values = []
    for v in SPEEDS:
        human = SimulatedHuman(HumanPolicy.of_kind("follower"), plant, gait, [(v, duration)],
                               feedforward_model=model)
        ctrl = PDTracking(lambda t, h=human: h.reference()[:2])
        rec = run_loop(plant, ctrl, human, duration)
        sel = rec.t >= settle
        idx = np.floor((rec.phase_human[sel] % 1.0) * bins).astype(int)
        u = rec.u_E[sel]
        values.append([u[idx == i].mean(axis=0) for i in range(bins)])
    return TorqueLookup((np.arange(bins) + 0.5) / bins, np.array(SPEEDS), np.array(values))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="regenerate the shipped lookup and KSC files")
    ap.add_argument("--lookup", type=Path, default=default_lookup_path())
    ap.add_argument("--ksc", type=Path, default=default_ksc_path())
    args = ap.parse_args(argv)
    model, gait = PlantModel(), NominalGait.default()
    lookup = record_lookup(model, gait)
    lookup.save(args.lookup, meta={"source": "stiff PD tracking, follower wearer, 100 bins"})
    params, err = build_ksc(model, gait)
    params.save(args.ksc, meta={"source": "fit to model inverse dynamics on nominal gait",
                                "relative_rms": f"{err:.5f}"})
    print(f"lookup -> {args.lookup}\nksc -> {args.ksc} (relative RMS {err:.4f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
