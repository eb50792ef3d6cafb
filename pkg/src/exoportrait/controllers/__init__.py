"""Feedforward exoskeleton controllers and their estimators."""
from .amtc import (AdaptationDivergedError, AmtcState, amtc_adapt, amtc_reference,
                   amtc_torque, basis)
from .ksc import DimensionError, KscParams, fit_ksc, ksc_torque
from .lookup import EmptyTableError, TorqueLookup, tbc_torque
from .phase import (KinematicPhaseEstimator, OnlineSpeedEstimator, PhaseUndefinedError,
                    SpeedUnavailableError, classify_speed, phase_kinematic, phase_time,
                    speed_estimate)
from .runtime import AMTC, HTC, TBC, Controller, PDTracking, htc_torque

__all__ = [
    "AMTC", "HTC", "TBC", "Controller", "PDTracking",
    "AdaptationDivergedError", "AmtcState", "DimensionError", "EmptyTableError",
    "KinematicPhaseEstimator", "KscParams", "OnlineSpeedEstimator",
    "PhaseUndefinedError", "SpeedUnavailableError", "TorqueLookup",
    "amtc_adapt", "amtc_reference", "amtc_torque", "basis", "classify_speed",
    "fit_ksc", "htc_torque", "ksc_torque", "phase_kinematic", "phase_time",
    "speed_estimate", "tbc_torque",
]
