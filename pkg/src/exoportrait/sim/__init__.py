"""Closed-loop simulation of the wearer, the device and their sensors."""
from .human import KINDS, HumanPolicy, SimulatedHuman, human_torque
from .loop import TrialAbortedError, run_loop
from .sensors import MuscleMap, default_muscle_map, synth_breaths, synth_emg, synth_grf
from .trial import CONTROLLERS, PROTOCOL, GaitTrial, TrialConfig, run_trial

__all__ = [
    "CONTROLLERS", "KINDS", "PROTOCOL", "GaitTrial", "HumanPolicy", "MuscleMap",
    "SimulatedHuman", "TrialAbortedError", "TrialConfig", "default_muscle_map",
    "human_torque", "run_loop", "run_trial", "synth_breaths", "synth_emg", "synth_grf",
]
