"""Interaction Portrait: changes in interaction torque versus muscular effort
between two controllers, read in polar coordinates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

DISAGREEMENT_INCREASE = "DisagreementIncrease"
HUMAN_TAKES_CONTROL = "HumanTakesControl"
DISAGREEMENT_DECREASE = "DisagreementDecrease"
HUMAN_YIELDS = "HumanYields"
BOUNDARY = "Boundary"

QUADRANTS = {1: DISAGREEMENT_INCREASE, 2: HUMAN_TAKES_CONTROL,
             3: DISAGREEMENT_DECREASE, 4: HUMAN_YIELDS}
QUADRANT_NUMBER = {v: k for k, v in QUADRANTS.items()}


class MissingBlockError(KeyError):
    def __init__(self, controller, speed):
        self.controller = controller
        self.speed = speed
        super().__init__(f"no metrics for controller {controller} at {speed} m/s")


def quadrant(d_tau: float, d_mu: float) -> str:
    if d_tau == 0 or d_mu == 0:
        return BOUNDARY
    if d_tau > 0:
        return DISAGREEMENT_INCREASE if d_mu > 0 else HUMAN_YIELDS
    return HUMAN_TAKES_CONTROL if d_mu > 0 else DISAGREEMENT_DECREASE


@dataclass(frozen=True)
class IpPoint:
    d_tau: float
    d_mu: float
    c1: str = ""
    c2: str = ""
    speed: float = float("nan")
    stride: Optional[int] = None
    subject: str = ""

    @property
    def radius(self) -> float:
        return math.hypot(self.d_tau, self.d_mu)

    @property
    def phase(self) -> float:
        """``atan2(d_mu, d_tau)`` in ``(-pi, pi]``."""
        ph = math.atan2(self.d_mu, self.d_tau)
        return math.pi if ph == -math.pi else ph

    @property
    def quadrant(self) -> str:
        return quadrant(self.d_tau, self.d_mu)

    def scaled(self, s_tau: float, s_mu: float) -> "IpPoint":
        return replace(self, d_tau=self.d_tau * s_tau, d_mu=self.d_mu * s_mu)

    def divided(self, by_tau: float, by_mu: float) -> "IpPoint":
        return replace(self, d_tau=self.d_tau / by_tau, d_mu=self.d_mu / by_mu)


def _block(metrics: Mapping, c, v):
    for (ci, vi), val in metrics.items():
        if ci == c and abs(float(vi) - float(v)) < 1e-9:
            return val
    raise MissingBlockError(c, v)


def ip_block(metrics: Mapping, c1: str, c2: str, v: float, subject: str = "") -> IpPoint:
    """Change from ``c1`` to ``c2`` at speed ``v``.

    ``metrics`` maps ``(controller, speed)`` to ``(tau_total, mu_total)``.
    The returned point is not normalised; see ``normalize_ip``.
    """
    tau1, mu1 = _block(metrics, c1, v)
    tau2, mu2 = _block(metrics, c2, v)
    return IpPoint(float(tau2 - tau1), float(mu2 - mu1), c1, c2, float(v), None, subject)


def ip_stridewise(tau_strides, mu_strides, tau_ref: float, mu_ref: float, c1: str = "TBC",
                  c2: str = "", v: float = float("nan"), strides: Optional[Sequence[int]] = None,
                  subject: str = "") -> list:
    """One point per stride of ``c2`` relative to the block means of ``c1``."""
    tau = np.asarray(tau_strides, dtype=float)
    mu = np.asarray(mu_strides, dtype=float)
    idx = range(len(tau)) if strides is None else strides
    return [IpPoint(float(a - tau_ref), float(b - mu_ref), c1, c2, float(v), int(s), subject)
            for a, b, s in zip(tau, mu, idx)]


def normalize_ip(points: Sequence[IpPoint], scope: str = "component"):
    """Normalise an analysis set.

    ``component``: ``d_tau`` and ``d_mu`` are each divided by their largest
    magnitude in the set.  ``shared``: both are divided by the largest
    magnitude of either coordinate.  ``radius``: both are divided by the
    largest radius.  The last two preserve every phase.

    Returns
    -------
    points, degenerate : list of IpPoint, bool
        ``degenerate`` is set (and the points are returned unchanged) when
        the set has no nonzero coordinate.
    """
    points = list(points)
    if scope == "component":
        mt = max((abs(p.d_tau) for p in points), default=0.0)
        mm = max((abs(p.d_mu) for p in points), default=0.0)
        if mt == 0 and mm == 0:
            warnings.warn("IP normalisation of an all-zero set; points left unchanged")
            return points, True
        return [p.divided(mt or 1.0, mm or 1.0) for p in points], False
    if scope == "shared":
        mx = max((max(abs(p.d_tau), abs(p.d_mu)) for p in points), default=0.0)
        if mx == 0:
            warnings.warn("IP normalisation of an all-zero set; points left unchanged")
            return points, True
        return [p.divided(mx, mx) for p in points], False
    if scope == "radius":
        mr = max((p.radius for p in points), default=0.0)
        if mr == 0:
            warnings.warn("IP normalisation of an all-zero set; points left unchanged")
            return points, True
        return [p.divided(mr, mr) for p in points], False
    raise ValueError(f"unknown normalisation scope {scope!r}")


def histogram_edges(bin_width: float = math.pi / 6) -> np.ndarray:
    n = 2 * math.pi / bin_width
    if not bin_width > 0 or abs(n - round(n)) > 1e-9:
        raise ValueError(f"bin width {bin_width} does not divide 2*pi")
    return np.arange(int(round(n)) + 1) * bin_width


def polar_histogram(points: Sequence[IpPoint], bin_width: float = math.pi / 6) -> np.ndarray:
    """Counts of point phases in the half-open bins ``[k w, (k + 1) w)`` of ``[0, 2 pi)``.

    Zero-radius points are excluded.
    """
    edges = histogram_edges(bin_width)
    n = len(edges) - 1
    counts = np.zeros(n, dtype=int)
    for p in points:
        if p.radius == 0:
            continue
        ang = p.phase % (2 * math.pi)
        k = min(int(math.floor(ang / bin_width + 1e-12)), n - 1)
        counts[k] += 1
    return counts


def mode_bin(counts, bin_width: float = math.pi / 6):
    """``(lo, hi)`` of the fullest bin, expressed in ``(-pi, pi]``."""
    n = len(counts)
    k = int(np.argmax(counts))
    if k * bin_width >= math.pi - 1e-12:
        k -= n
    return k * bin_width, (k + 1) * bin_width


def circular_mean(phases):
    """Mean direction and mean resultant length."""
    ph = np.asarray(phases, dtype=float)
    if ph.size == 0:
        return float("nan"), 0.0
    c, s = np.cos(ph).mean(), np.sin(ph).mean()
    return math.atan2(s, c), math.hypot(c, s)


@dataclass
class PhaseEvolution:
    stride: np.ndarray
    phase: np.ndarray
    running_mean: np.ndarray  # nan where undefined
    resultant: np.ndarray
    undefined: np.ndarray


def phase_evolution(points: Sequence[IpPoint], window: int = 10, min_resultant: float = 1e-6
                    ) -> PhaseEvolution:
    """Phases in stride order and their trailing circular running mean."""
    pts = sorted(points, key=lambda p: (p.stride if p.stride is not None else 0))
    stride = np.array([p.stride if p.stride is not None else i for i, p in enumerate(pts)])
    phase = np.array([p.phase for p in pts])
    mean = np.empty(len(pts))
    res = np.empty(len(pts))
    for i in range(len(pts)):
        m, r = circular_mean(phase[max(0, i - window + 1):i + 1])
        mean[i], res[i] = m, r
    undefined = res < min_resultant
    mean[undefined] = np.nan
    return PhaseEvolution(stride, phase, mean, res, undefined)


def points_table(points: Sequence[IpPoint]):
    """IpPoints as a DataFrame with derived polar fields."""
    import pandas as pd

    return pd.DataFrame({
        "subject": [p.subject for p in points],
        "c1": [p.c1 for p in points],
        "c2": [p.c2 for p in points],
        "speed": [p.speed for p in points],
        "stride": [-1 if p.stride is None else p.stride for p in points],
        "d_tau": [p.d_tau for p in points],
        "d_mu": [p.d_mu for p in points],
        "radius": [p.radius for p in points],
        "phase": [p.phase for p in points],
        "quadrant": [p.quadrant for p in points],
    })
