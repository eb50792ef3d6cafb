"""Structured JSON configuration and its content hash.

The configuration holds the plant model (every segment explicitly), the
controller parameters and the analysis scopes.  Its hash is the SHA-256 of
the canonical JSON encoding (sorted keys, no whitespace), so it changes iff
a field value changes; key order and formatting of the file do not matter.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict
from pathlib import Path

from .dynamics import BodySegments, PlantModel, Segment

SEGMENTS = ("trunk", "thigh_r", "shank_r", "thigh_l", "shank_l")


class ConfigError(ValueError):
    pass


def body_to_dict(body: BodySegments) -> dict:
    return {name: asdict(getattr(body, name)) for name in SEGMENTS}


def body_from_dict(d: dict) -> BodySegments:
    try:
        return BodySegments(*(Segment(**{k: float(v) for k, v in d[name].items()})
                              for name in SEGMENTS))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed body segments: {exc}") from exc


def model_to_dict(model: PlantModel) -> dict:
    return {
        "exo": body_to_dict(model.exo),
        "human": body_to_dict(model.human),
        "friction": list(model.friction),
        "gravity": model.gravity,
        "include_human_inertia": model.include_human_inertia,
        "torque_limit": model.torque_limit,
        "hip_limits": list(model.hip_limits),
        "knee_limits": list(model.knee_limits),
    }


def model_from_dict(d: dict) -> PlantModel:
    try:
        return PlantModel(
            exo=body_from_dict(d["exo"]), human=body_from_dict(d["human"]),
            friction=tuple(float(x) for x in d["friction"]), gravity=float(d["gravity"]),
            include_human_inertia=bool(d.get("include_human_inertia", False)),
            torque_limit=float(d.get("torque_limit", 60.0)),
            hip_limits=tuple(d.get("hip_limits", (-0.6, 2.1))),
            knee_limits=tuple(d.get("knee_limits", (-2.3, 0.05))))
    except KeyError as exc:
        raise ConfigError(f"model entry missing field {exc}") from exc


DEFAULT_CONFIG = {
    "model": model_to_dict(PlantModel()),
    "controllers": {
        "htc": {"w": 0.5},
        "amtc": {"harmonics": 5, "epsilon": 0.5, "dc": True, "guard": 1.5,
                 "r0_speed": 0.6, "rate_cutoff": 5.0},
    },
    "human": {"body_mass": 75.0, "exo_mass": 17.0, "gain_jitter": 0.1},
    "sigproc": {"emg_band": [5.0, 500.0], "emg_order": 4, "envelope_window": 0.1,
                "grf_threshold": 30.0, "refractory": 0.3, "phase_points": 101},
    "ip": {"block_scope": "pair", "duration_normalized": True,
           "steady_state_fraction": 0.5, "running_window": 10},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = dict(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown configuration key {path + k!r}")
        if isinstance(base[k], dict) and k != "model":
            if not isinstance(v, dict):
                raise ConfigError(f"configuration key {path + k!r} must be a mapping")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def load_config(path=None) -> dict:
    """Defaults overlaid with the JSON file at ``path`` (unknown keys are errors)."""
    cfg = default_config()
    if path is None:
        return cfg
    try:
        with open(Path(path)) as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg = _merge(cfg, user)
    model_from_dict(cfg["model"])  # validate eagerly
    return cfg


def _normalise(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        return float(obj)  # 1 and 1.0 mean the same thing
    if isinstance(obj, dict):
        return {str(k): _normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalise(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _normalise(obj.tolist())
    raise ConfigError(f"cannot serialise {type(obj).__name__} into the configuration")


def canonical_json(obj) -> str:
    return json.dumps(_normalise(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]
