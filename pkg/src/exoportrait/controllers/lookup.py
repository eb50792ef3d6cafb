"""Phase- and speed-indexed torque tables for TBC and the GPC half of HTC."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dynamics import JOINTS
from ..tables import read_table, write_table

LOOKUP_FORMAT = "exoportrait-torque-lookup/1"


class EmptyTableError(ValueError):
    pass


@dataclass(frozen=True)
class TorqueLookup:
    """``values[s, i, j]``: torque of joint ``j`` at speed ``speeds[s]`` and phase ``phi[i]``.

    The phase grid is uniform on ``[0, 1)`` and wraps periodically.
    """

    phi: np.ndarray
    speeds: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.size == 0:
            raise EmptyTableError("empty torque table")
        if self.values.shape != (len(self.speeds), len(self.phi), 4):
            raise ValueError(f"table shape {self.values.shape} does not match grid")

    def at_speed(self, v: float) -> np.ndarray:
        sp = self.speeds
        if v <= sp[0]:
            return self.values[0]
        if v >= sp[-1]:
            return self.values[-1]
        s = int(np.searchsorted(sp, v)) - 1
        w = (v - sp[s]) / (sp[s + 1] - sp[s])
        return (1 - w) * self.values[s] + w * self.values[s + 1]

    def query(self, phi: float, v: float) -> np.ndarray:
        n = len(self.phi)
        x = (phi % 1.0) * n
        i = int(x) % n
        w = x - int(x)
        table = self.at_speed(v)
        return (1 - w) * table[i] + w * table[(i + 1) % n]

    def max_step(self) -> float:
        """Largest node-to-node change including the wrap from last to first node."""
        diff = np.abs(np.roll(self.values, -1, axis=1) - self.values)
        return float(diff.max())

    def save(self, path, meta=None) -> None:
        rows = []
        for s, v in enumerate(self.speeds):
            for i, p in enumerate(self.phi):
                rows.append([v, p, *self.values[s, i]])
        write_table(path, ["speed", "phi", *JOINTS], ["m/s", "1"] + ["N*m"] * 4,
                    np.array(rows), meta={"format": LOOKUP_FORMAT, **(meta or {})})

    @classmethod
    def load(cls, path) -> "TorqueLookup":
        tab = read_table(path)
        if tab.meta.get("format") != LOOKUP_FORMAT:
            raise ValueError(f"{path}: not a torque lookup table")
        data = tab.data
        if data.size == 0:
            raise EmptyTableError(f"{path}: empty torque table")
        speeds = np.unique(data[:, 0])
        phi = np.unique(data[:, 1])
        values = data[:, 2:].reshape(len(speeds), len(phi), 4)
        return cls(phi, speeds, values)


def tbc_torque(lookup: TorqueLookup, phi: float, speed: float) -> np.ndarray:
    """Interpolated table torque at ``(phi, speed)``."""
    return lookup.query(phi, speed)


def default_lookup_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "torque_lookup.csv"
