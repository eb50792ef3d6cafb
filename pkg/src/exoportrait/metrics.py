"""Per-stride and per-block effort, interaction and VO2 aggregates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .sigproc import CoverageError, Stride


class DegenerateProfileError(ValueError):
    pass


@dataclass
class MetricRecord:
    """Aggregates of one stride (``stride`` set) or one block (``stride`` None)."""

    controller: str
    speed: float
    stride: Optional[int]
    mu_per_muscle: np.ndarray
    mu_total: float
    tau_per_joint: np.ndarray
    tau_total: float
    eta: np.ndarray = field(default_factory=lambda: np.empty(0))
    duration: float = 0.0


def _cumulative(values, t):
    """Running trapezoid integral of ``values`` (``(n, ...)``) from ``t[0]``."""
    v = np.asarray(values, dtype=float)
    dt = np.diff(t).reshape((-1,) + (1,) * (v.ndim - 1))
    out = np.zeros_like(v)
    np.cumsum(0.5 * dt * (v[1:] + v[:-1]), axis=0, out=out[1:])
    return out


def _integral_at(cum, values, t, x):
    """Cumulative trapezoid integral up to arbitrary times ``x`` (exact for the
    piecewise-linear interpolant)."""
    i = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2)
    h = t[i + 1] - t[i]
    w = ((x - t[i]) / h).reshape((-1,) + (1,) * (values.ndim - 1))
    fx = (1 - w) * values[i] + w * values[i + 1]
    return cum[i] + 0.5 * (x - t[i]).reshape(w.shape) * (values[i] + fx)


def stride_means(values, t, strides: Sequence[Stride]) -> np.ndarray:
    """``(1/T_s) * integral over the stride`` of ``values`` for every stride.

    Trapezoidal quadrature on the samples, with the stride ends linearly
    interpolated.  Returns ``(strides, ...)``.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(strides) == 0:
        return np.empty((0,) + v.shape[1:])
    starts = np.array([s.start for s in strides])
    ends = np.array([s.end for s in strides])
    for k, s in enumerate(strides):
        if s.start < t[0] - 1e-9 or s.end > t[-1] + 1e-9:
            raise CoverageError(s.index, s.start, s.end, (t[0], t[-1]))
    cum = _cumulative(v, t)
    a = _integral_at(cum, v, t, starts)
    b = _integral_at(cum, v, t, ends)
    return (b - a) / (ends - starts).reshape((-1,) + (1,) * (v.ndim - 1))


def muscle_effort_stride(envelope, t, stride: Stride) -> np.ndarray:
    """``mu_{m,s} = (1/T_s) * integral of e_m^2`` per channel."""
    e = np.asarray(envelope, dtype=float)
    return stride_means(e * e, t, [stride])[0]


def muscle_effort_strides(envelope, t, strides: Sequence[Stride]) -> np.ndarray:
    e = np.asarray(envelope, dtype=float)
    return stride_means(e * e, t, strides)


def pcsa_average(mu, weights) -> np.ndarray:
    """PCSA-weighted average over the last axis."""
    w = np.asarray(weights, dtype=float)
    return np.asarray(mu, dtype=float) @ w / w.sum()


def block_muscle_effort(mu_strides, durations, weights, normalized: bool = False):
    """Block effort ``mu_{c,v,m} = sum_s T_s mu_{m,s}`` and its PCSA-weighted average.

    With ``normalized`` the sums are divided by the total stride time,
    giving a duration-independent mean effort.
    """
    mu = np.atleast_2d(np.asarray(mu_strides, dtype=float))
    T = np.asarray(durations, dtype=float)
    per_muscle = T @ mu
    if normalized:
        per_muscle = per_muscle / T.sum()
    return per_muscle, float(pcsa_average(per_muscle, weights))


def interaction_stride(u_int, t, stride: Stride) -> np.ndarray:
    """``tau_{j,s} = (1/T_s) * integral of |u_int,j|``."""
    return stride_means(np.abs(np.asarray(u_int, dtype=float)), t, [stride])[0]


def interaction_strides(u_int, t, strides: Sequence[Stride]) -> np.ndarray:
    return stride_means(np.abs(np.asarray(u_int, dtype=float)), t, strides)


def block_interaction(tau_strides, durations, normalized: bool = False):
    """``tau_{c,v,j} = sum_s T_s tau_{j,s}`` and their mean over joints."""
    tau = np.atleast_2d(np.asarray(tau_strides, dtype=float))
    T = np.asarray(durations, dtype=float)
    per_joint = T @ tau
    if normalized:
        per_joint = per_joint / T.sum()
    return per_joint, float(per_joint.mean())


def vo2_baseline(eta, speeds) -> dict:
    """Mean VO2 of natural walking at each speed: ``{speed: mean}``."""
    eta = np.asarray(eta, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    return {float(v): float(eta[speeds == v].mean()) for v in np.unique(speeds)}


def vo2_normalize(eta, speeds, baseline: Mapping[float, float]):
    """Breath-wise ratio to the natural-walking mean at the same speed.

    Returns
    -------
    eta_hat : per-breath normalised values
    totals : ``{speed: sum of eta_hat}``
    """
    eta = np.asarray(eta, dtype=float)
    speeds = np.broadcast_to(np.asarray(speeds, dtype=float), eta.shape)
    out = np.empty_like(eta)
    totals = {}
    for v in np.unique(speeds):
        key = _speed_key(baseline, v)
        base = baseline[key]
        if not base > 0:
            raise ValueError(f"baseline VO2 at {v} m/s must be positive")
        sel = speeds == v
        out[sel] = eta[sel] / base
        totals[float(v)] = float(out[sel].sum())
    return out, totals


def _speed_key(baseline, v):
    for k in baseline:
        if abs(float(k) - float(v)) < 1e-9:
            return k
    raise KeyError(f"no natural-walking VO2 baseline at {float(v)} m/s")


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(dx @ dx)
    sy = np.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        raise DegenerateProfileError("degenerate profile: zero variance")
    return float(dx @ dy / (sx * sy))


def grf_correlation(profiles, reference) -> np.ndarray:
    """Pearson r of every stride profile against the natural-walking mean.

    ``profiles`` is ``(strides, points[, axes])`` on the shared phase grid,
    ``reference`` is ``(points[, axes])``; returns ``(strides[, axes])``.
    """
    p = np.asarray(profiles, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if p.ndim == 2:
        return np.array([pearson(s, ref) for s in p])
    return np.array([[pearson(s[:, a], ref[:, a]) for a in range(p.shape[2])] for s in p])
