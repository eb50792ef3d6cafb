"""GaitTrial file sets.

A trial directory holds one headered table per stream plus a JSON
description::

    trial.json        metadata (controller, subject, seed, schedule, rates, hashes)
    kinematics.csv    control-rate stream: q, q_dot, q_ddot, trunk, u_E, [u_int], speed
    grf.csv           per-belt ground reaction forces
    emg.csv           14 raw EMG channels (optional)
    vo2.csv           breath-by-breath VO2
    events.csv        heel strikes known to the simulator (optional)

Numeric streams are stored as integer counts of their storage resolution.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .dynamics import JOINTS, PlantModel, PlantState, estimate_interaction_torque
from .sim.sensors import GRF_CHANNELS, default_muscle_map
from .sim.trial import RESOLUTION, GaitTrial
from .tables import TableFormatError, read_table, write_table

FORMAT = "exoportrait-trial/1"
RATE_TOLERANCE = 1e-3

FILES = {"meta": "trial.json", "kinematics": "kinematics.csv", "grf": "grf.csv",
         "emg": "emg.csv", "vo2": "vo2.csv", "events": "events.csv"}


class TrialFileError(ValueError):
    code = "invalid-trial"


class MissingFileError(TrialFileError):
    code = "missing-file"


class MalformedHeaderError(TrialFileError):
    code = "malformed-header"


class RateMismatchError(TrialFileError):
    code = "rate-mismatch"


class NonMonotonicTimeError(TrialFileError):
    code = "non-monotonic-time"


def _cols(prefix):
    return [f"{prefix}_{j}" for j in JOINTS]


def kinematic_layout(has_u_int: bool, has_truth: bool):
    """``(columns, units, resolution)`` of the kinematics table."""
    R = RESOLUTION
    spec = [("t", "s", R["t"])]
    spec += [(c, "rad", R["q"]) for c in _cols("q")]
    spec += [(c, "rad/s", R["q_dot"]) for c in _cols("q_dot")]
    spec += [(c, "rad/s^2", R["q_ddot"]) for c in _cols("q_ddot")]
    spec += [("gamma", "rad", R["gamma"]), ("gamma_dot", "rad/s", R["gamma_dot"]),
             ("gamma_ddot", "rad/s^2", R["gamma_ddot"]),
             ("accel_x", "m/s^2", R["accel"]), ("accel_z", "m/s^2", R["accel"])]
    spec += [(c, "N*m", R["torque"]) for c in _cols("u_E")]
    if has_u_int:
        spec += [(c, "N*m", R["torque"]) for c in _cols("u_int")]
    spec += [("speed", "m/s", R["speed"])]
    if has_truth:
        spec += [(c, "N*m", R["torque"]) for c in _cols("u_H")]
        spec += [("phase_true", "1", R["phase"])]
    return [s[0] for s in spec], [s[1] for s in spec], [s[2] for s in spec]


def write_trial(trial: GaitTrial, directory) -> Path:
    """Write the file set of ``trial`` into ``directory`` (created if needed)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cfg = trial.meta.get("trial_config", {})
    rates = {"kinematics": float(cfg.get("control_rate", 200)),
             "grf": float(cfg.get("grf_rate", 1000)), "emg": float(cfg.get("emg_rate", 2000))}
    meta = {"format": FORMAT, **trial.meta, "rates": rates, "has_emg": trial.has_emg}
    with open(d / FILES["meta"], "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    tag = {"config_hash": trial.meta.get("config_hash", "")}

    truth = trial.u_H is not None and trial.phase is not None
    cols, units, res = kinematic_layout(trial.u_int is not None, truth)
    parts = [trial.t[:, None], trial.q, trial.q_dot, trial.q_ddot, trial.gamma[:, None],
             trial.gamma_dot[:, None], trial.gamma_ddot[:, None], trial.accel, trial.u_E]
    if trial.u_int is not None:
        parts.append(trial.u_int)
    parts.append(trial.speed[:, None])
    if truth:
        parts += [trial.u_H, trial.phase[:, None]]
    write_table(d / FILES["kinematics"], cols, units, np.hstack(parts),
                meta={**tag, "rate": rates["kinematics"]}, scales=res)

    write_table(d / FILES["grf"], ["t", *GRF_CHANNELS], ["s"] + ["N"] * 6,
                np.hstack([trial.grf_t[:, None], trial.grf]),
                meta={**tag, "rate": rates["grf"]},
                scales=[RESOLUTION["t"]] + [RESOLUTION["grf"]] * 6)
    if trial.has_emg:
        ch = default_muscle_map().channels
        write_table(d / FILES["emg"], ["t", *ch], ["s"] + ["V"] * len(ch),
                    np.hstack([trial.emg_t[:, None], trial.emg]),
                    meta={**tag, "rate": rates["emg"]},
                    scales=[RESOLUTION["t"]] + [RESOLUTION["emg"]] * len(ch))
    write_table(d / FILES["vo2"], ["t", "eta"], ["s", "ml/kg/min"],
                np.column_stack([trial.breath_t, trial.breath_eta]), meta=tag,
                scales=[RESOLUTION["t"], RESOLUTION["vo2"]])
    ev = pd.DataFrame({"leg": [leg for leg, _ in trial.events],
                       "t": [float(te) for _, te in trial.events]})
    write_table(d / FILES["events"], ["leg", "t"], ["1", "s"], ev, meta=tag)
    return d


def _read(d: Path, key: str, expected=None):
    path = d / FILES[key]
    if not path.exists():
        raise MissingFileError(f"missing file {path}")
    try:
        tab = read_table(path)
    except (TableFormatError, ValueError) as exc:
        raise MalformedHeaderError(f"{path}: {exc}") from exc
    if expected is not None and tab.columns != list(expected):
        raise MalformedHeaderError(f"{path}: expected columns {list(expected)}, got {tab.columns}")
    return tab


def _check_time(path, t, rate: Optional[float]):
    if len(t) > 1 and not np.all(np.diff(t) > 0):
        k = int(np.argmin(np.diff(t) > 0))
        raise NonMonotonicTimeError(f"{path}: non-monotonic time at row {k + 1}")
    if rate is not None and len(t) > 1:
        spacing = float(np.median(np.diff(t)))
        if abs(spacing * rate - 1.0) > RATE_TOLERANCE:
            raise RateMismatchError(f"{path}: declared rate {rate} Hz but median spacing "
                                    f"{spacing:.6g} s")


def ingest_trial(directory, model: Optional[PlantModel] = None, emg: bool = True) -> GaitTrial:
    """Read and validate a trial directory.

    With ``emg`` False the EMG file is neither required nor read.  When the
    kinematics carry no interaction torque and a ``model`` is given, it is
    recomputed from the recorded state and motor torque.
    """
    d = Path(directory)
    mpath = d / FILES["meta"]
    if not mpath.exists():
        raise MissingFileError(f"missing file {mpath}")
    try:
        with open(mpath) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{mpath}: {exc}") from exc
    for key in ("controller", "schedule", "rates"):
        if key not in meta:
            raise MalformedHeaderError(f"{mpath}: missing entry {key!r}")
    rates = meta["rates"]

    kin = _read(d, "kinematics")
    has_u_int = "u_int_hip_right" in kin.columns
    truth = "phase_true" in kin.columns
    cols, _, _ = kinematic_layout(has_u_int, truth)
    if kin.columns != cols:
        raise MalformedHeaderError(f"{d / FILES['kinematics']}: unexpected columns {kin.columns}")
    _check_time(d / FILES["kinematics"], kin.column("t"), rates.get("kinematics"))
    f = kin.frame
    pick = lambda names: f[names].to_numpy(dtype=float)  # noqa: E731

    grf = _read(d, "grf", ["t", *GRF_CHANNELS])
    _check_time(d / FILES["grf"], grf.column("t"), rates.get("grf"))
    emg_t = emg_x = None
    if emg:
        ch = default_muscle_map().channels
        tab = _read(d, "emg", ["t", *ch])
        _check_time(d / FILES["emg"], tab.column("t"), rates.get("emg"))
        emg_t, emg_x = tab.column("t").astype(float), tab.data[:, 1:]
    vo2 = _read(d, "vo2", ["t", "eta"])
    _check_time(d / FILES["vo2"], vo2.column("t"), None)
    events = []
    if (d / FILES["events"]).exists():
        ev = _read(d, "events", ["leg", "t"])
        events = [(str(leg), float(te)) for leg, te in zip(ev.column("leg"), ev.column("t"))]

    meta = {k: v for k, v in meta.items() if k not in ("format", "rates", "has_emg")}
    trial = GaitTrial(
        meta=meta, t=kin.column("t").astype(float), q=pick(_cols("q")),
        q_dot=pick(_cols("q_dot")), q_ddot=pick(_cols("q_ddot")),
        gamma=kin.column("gamma").astype(float), gamma_dot=kin.column("gamma_dot").astype(float),
        gamma_ddot=kin.column("gamma_ddot").astype(float), accel=pick(["accel_x", "accel_z"]),
        u_E=pick(_cols("u_E")), u_int=pick(_cols("u_int")) if has_u_int else None,
        speed=kin.column("speed").astype(float),
        grf_t=grf.column("t").astype(float), grf=grf.data[:, 1:],
        emg_t=emg_t, emg=emg_x,
        breath_t=vo2.column("t").astype(float), breath_eta=vo2.column("eta").astype(float),
        events=events,
        u_H=pick(_cols("u_H")) if truth else None,
        phase=kin.column("phase_true").astype(float) if truth else None)
    if trial.u_int is None and model is not None and trial.controller != "NONE":
        state = PlantState(trial.t, trial.gamma, trial.gamma_dot, trial.gamma_ddot, trial.accel,
                           trial.q, trial.q_dot, trial.q_ddot)
        trial.u_int = estimate_interaction_torque(model, state, trial.u_E)
    return trial


def write_frame(path, frame: pd.DataFrame, units: dict, meta: Optional[dict] = None) -> None:
    """Result table with a units row (missing units default to ``1``)."""
    cols = list(frame.columns)
    write_table(path, cols, [units.get(c, "1") for c in cols], frame, meta=meta)


def read_frame(path) -> pd.DataFrame:
    return read_table(path).frame
