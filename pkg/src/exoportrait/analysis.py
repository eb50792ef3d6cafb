"""From GaitTrials to stride tables, block metrics and interaction portraits.

One subject's trials are analysed together: MVC normalisation uses the
largest envelope across all of that subject's trials, the VO2 baseline is
its natural-walking (``NONE``) block, and the GRF reference profile is the
phase average of that block.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import ip as ipm
from .config import default_config
from .dynamics import JOINTS
from .metrics import (MetricRecord, block_interaction, block_muscle_effort, grf_correlation,
                      interaction_strides, muscle_effort_strides, pcsa_average, vo2_baseline,
                      vo2_normalize)
from .sigproc import (Stride, detect_heel_strikes, mvc_from, process_emg, resample_strides,
                      segment_strides)
from .sim.sensors import MuscleMap, default_muscle_map
from .sim.trial import GaitTrial
from .stats import DegenerateSampleError, TestResult, adjust, friedman, wilcoxon_signed_rank

EXO_CONTROLLERS = ("TBC", "HTC", "AMTC")
NATURAL = "NONE"
PAIRS = (("TBC", "HTC"), ("TBC", "AMTC"), ("HTC", "AMTC"))


class MissingEmgError(ValueError):
    """An EMG-dependent analysis was asked of a trial recorded without EMG."""


def _settings(config: Optional[dict]) -> dict:
    return config if config is not None else default_config()


@dataclass
class TrialStrides:
    """Per-stride quantities of one trial, before subject-level normalisation."""

    controller: str             # condition label; the controller name unless relabelled
    subject: str
    strides: List[Stride]
    speed: np.ndarray           # belt speed of each stride's segment
    segment_start: np.ndarray   # start of that segment, s
    segment_end: np.ndarray
    tau: Optional[np.ndarray]   # (S, 4) mean |u_int|, N*m
    mu_raw: Optional[np.ndarray]  # (S, 14) mean squared envelope, before MVC
    envelope_max: Optional[np.ndarray]
    grf_profiles: np.ndarray    # (S, points, 3) right belt
    breath_t: np.ndarray
    breath_eta: np.ndarray
    breath_speed: np.ndarray
    natural: bool = False
    profiles: dict = field(default_factory=dict)  # (quantity, speed) -> (mean, sd)
    duration: np.ndarray = field(init=False)

    def __post_init__(self):
        self.duration = np.array([s.duration for s in self.strides])


def condition(trial: GaitTrial) -> str:
    """Label of a block within its subject's set (defaults to the controller)."""
    return trial.meta.get("condition", trial.controller)


def detect_strides(trial: GaitTrial, threshold: float = 30.0, refractory: float = 0.3) -> list:
    """Right-leg strides from the vertical force of the right belt."""
    fs = 1.0 / np.median(np.diff(trial.grf_t[:1000]))
    ev = detect_heel_strikes(trial.grf[:, 0], fs=fs, threshold=threshold,
                             refractory=refractory, t0=float(trial.grf_t[0]))
    return segment_strides(ev, "right")


def _assign_segments(trial: GaitTrial, strides: Sequence[Stride]):
    """Keep strides lying wholly in one schedule segment; renumber them."""
    kept, speed, s0, s1 = [], [], [], []
    for v, a, b in trial.segments():
        for s in strides:
            if s.start >= a - 1e-9 and s.end <= b + 1e-9:
                kept.append(Stride(len(kept), s.start, s.end, s.leg))
                speed.append(v)
                s0.append(a)
                s1.append(b)
    return kept, np.array(speed), np.array(s0), np.array(s1)


def trial_strides(trial: GaitTrial, config: Optional[dict] = None,
                  muscles: Optional[MuscleMap] = None, need_emg: bool = True) -> TrialStrides:
    sp = _settings(config)["sigproc"]
    strides = detect_strides(trial, sp["grf_threshold"], sp["refractory"])
    strides, speed, seg0, seg1 = _assign_segments(trial, strides)
    if not strides:
        raise ValueError(f"trial {trial.controller}/{trial.subject}: no complete strides detected")
    tau = None
    if trial.u_int is not None:
        tau = interaction_strides(trial.u_int, trial.t, strides)
    mu_raw = env_max = None
    if trial.has_emg:
        fs = 1.0 / np.median(np.diff(trial.emg_t[:1000]))
        env = process_emg(trial.emg, fs=fs, band=tuple(sp["emg_band"]), order=sp["emg_order"],
                          window=sp["envelope_window"])
        mu_raw = muscle_effort_strides(env, trial.emg_t, strides)
        env_max = env.max(axis=0)
        del env
    elif need_emg:
        raise MissingEmgError(f"trial {trial.controller}/{trial.subject} has no EMG")
    prof = resample_strides(trial.grf[:, :3], trial.grf_t, strides, sp["phase_points"])
    bspeed = np.array([trial.speed[min(np.searchsorted(trial.t, tb), len(trial.t) - 1)]
                       for tb in trial.breath_t])
    profiles = {}
    for v in np.unique(speed):
        sel = speed == v
        profiles[("grf", float(v))] = (prof[sel].mean(axis=0), prof[sel].std(axis=0))
        if trial.u_int is not None:
            u = resample_strides(trial.u_int, trial.t, [s for s, k in zip(strides, sel) if k],
                                 sp["phase_points"])
            profiles[("u_int", float(v))] = (u.mean(axis=0), u.std(axis=0))
    return TrialStrides(condition(trial), trial.subject, strides, speed, seg0, seg1, tau,
                        mu_raw, env_max, prof, np.asarray(trial.breath_t),
                        np.asarray(trial.breath_eta), bspeed, trial.controller == NATURAL,
                        profiles)


@dataclass
class SubjectAnalysis:
    subject: str
    trials: List[TrialStrides]
    mvc: Optional[np.ndarray]
    weights: np.ndarray
    normalized: bool
    vo2_base: Dict[float, float]
    grf_reference: Dict[float, np.ndarray]
    channels: list = field(default_factory=list)

    def mu(self, ts: TrialStrides) -> np.ndarray:
        """MVC-normalised per-stride effort ``(S, 14)``."""
        if ts.mu_raw is None or self.mvc is None:
            raise MissingEmgError("muscle effort needs EMG")
        return ts.mu_raw / self.mvc ** 2

    def trial(self, controller: str) -> TrialStrides:
        for ts in self.trials:
            if ts.controller == controller:
                return ts
        raise ipm.MissingBlockError(controller, float("nan"))

    def controllers(self) -> list:
        return [ts.controller for ts in self.trials]

    def speeds(self) -> list:
        return sorted({float(v) for ts in self.trials for v in np.unique(ts.speed)})

    # ------------------------------------------------------------- records
    def stride_records(self) -> List[MetricRecord]:
        out = []
        for ts in self.trials:
            mu = self.mu(ts) if ts.mu_raw is not None else None
            for k, s in enumerate(ts.strides):
                m = mu[k] if mu is not None else np.full(len(self.weights), np.nan)
                tj = ts.tau[k] if ts.tau is not None else np.full(4, np.nan)
                out.append(MetricRecord(ts.controller, float(ts.speed[k]), s.index, m,
                                        float(pcsa_average(m, self.weights)), tj,
                                        float(np.mean(tj)), duration=s.duration))
        return out

    def block(self, controller: str, v: float) -> MetricRecord:
        ts = self.trial(controller)
        sel = np.abs(ts.speed - v) < 1e-9
        if not sel.any():
            raise ipm.MissingBlockError(controller, v)
        T = ts.duration[sel]
        if ts.mu_raw is not None:
            mu_m, mu_tot = block_muscle_effort(self.mu(ts)[sel], T, self.weights, self.normalized)
        else:
            mu_m, mu_tot = np.full(len(self.weights), np.nan), float("nan")
        if ts.tau is not None:
            tau_j, tau_tot = block_interaction(ts.tau[sel], T, self.normalized)
        else:
            tau_j, tau_tot = np.full(4, np.nan), float("nan")
        eta = np.empty(0)
        if self.vo2_base:
            bsel = np.abs(ts.breath_speed - v) < 1e-9
            eta, _ = vo2_normalize(ts.breath_eta[bsel], ts.breath_speed[bsel], self.vo2_base)
        return MetricRecord(controller, float(v), None, mu_m, mu_tot, tau_j, tau_tot,
                            eta, float(T.sum()))

    def _blocks_with_kind(self):
        for ts in self.trials:
            for v in sorted({float(x) for x in np.unique(ts.speed)}):
                yield self.block(ts.controller, v), ts.natural

    def blocks(self) -> List[MetricRecord]:
        return [b for b, _ in self._blocks_with_kind()]

    def block_totals(self) -> dict:
        """``{(controller, speed): (tau_total, mu_total)}`` of the exoskeleton blocks."""
        return {(b.controller, b.speed): (b.tau_total, b.mu_total)
                for b, nat in self._blocks_with_kind() if not nat}

    # ------------------------------------------------------------------ IP
    def ip_blocks(self, pairs=PAIRS) -> List[ipm.IpPoint]:
        totals = self.block_totals()
        have = {c for c, _ in totals}
        out = []
        for c1, c2 in pairs:
            if c1 not in have or c2 not in have:
                continue
            for v in self.speeds():
                out.append(ipm.ip_block(totals, c1, c2, v, self.subject))
        return out

    def ip_strides(self, c2: str, c1: str = "TBC", steady_fraction: float = 0.0
                   ) -> List[ipm.IpPoint]:
        """Stride-wise points of ``c2`` against the duration-normalised ``c1`` blocks.

        ``steady_fraction`` drops strides starting in that leading fraction
        of each segment.
        """
        ts = self.trial(c2)
        mu = pcsa_average(self.mu(ts), self.weights)
        if ts.tau is None:
            raise ValueError(f"{c2} has no interaction torque")
        tau = ts.tau.mean(axis=1)
        ref = replace(self, normalized=True)
        out = []
        for v in sorted({float(x) for x in np.unique(ts.speed)}):
            b = ref.block(c1, v)
            sel = np.abs(ts.speed - v) < 1e-9
            start = np.array([s.start for s in ts.strides])
            cut = ts.segment_start + steady_fraction * (ts.segment_end - ts.segment_start)
            sel &= start >= cut - 1e-9
            idx = np.nonzero(sel)[0]
            out += ipm.ip_stridewise(tau[idx], mu[idx], b.tau_total, b.mu_total, c1, c2, v,
                                     [ts.strides[i].index for i in idx], self.subject)
        return out

    # --------------------------------------------------------------- VO2 / GRF
    def vo2_totals(self) -> dict:
        """``{(controller, speed): sum of normalised breaths}``."""
        if not self.vo2_base:
            return {}
        return {(b.controller, b.speed): float(b.eta.sum()) for b in self.blocks()}

    def grf_correlations(self) -> pd.DataFrame:
        rows = []
        for ts in self.trials:
            for v, ref in self.grf_reference.items():
                sel = np.abs(ts.speed - v) < 1e-9
                if not sel.any():
                    continue
                r = grf_correlation(ts.grf_profiles[sel], ref)
                for k, i in enumerate(np.nonzero(sel)[0]):
                    rows.append({"subject": self.subject, "controller": ts.controller,
                                 "speed": v, "stride": ts.strides[i].index,
                                 "r_vertical": r[k, 0], "r_lateral": r[k, 1],
                                 "r_longitudinal": r[k, 2]})
        return pd.DataFrame(rows)


def analyze_subject(trials: Iterable[GaitTrial], config: Optional[dict] = None,
                    muscles: Optional[MuscleMap] = None, need_emg: bool = True
                    ) -> SubjectAnalysis:
    """Stride segmentation and subject-level normalisation of one subject's trials.

    Controllers must be unique within the set; a ``NONE`` trial, if present,
    provides the VO2 baseline and the GRF reference profiles.
    """
    cfg = _settings(config)
    muscles = muscles or default_muscle_map()
    trials = list(trials)
    subjects = {t.subject for t in trials}
    if len(subjects) != 1:
        raise ValueError(f"expected one subject, got {sorted(subjects)}")
    names = [condition(t) for t in trials]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate controller blocks for subject {trials[0].subject}")
    per = [trial_strides(t, cfg, muscles, need_emg) for t in trials]
    maxes = [ts.envelope_max for ts in per if ts.envelope_max is not None]
    mvc = mvc_from([m[None, :] for m in maxes]) if maxes else None
    base, ref = {}, {}
    for ts in per:
        if ts.natural:
            base = vo2_baseline(ts.breath_eta, ts.breath_speed)
            for v in np.unique(ts.speed):
                ref[float(v)] = ts.grf_profiles[ts.speed == v].mean(axis=0)
    return SubjectAnalysis(trials[0].subject, per, mvc, muscles.weights,
                           bool(cfg["ip"]["duration_normalized"]), base, ref, muscles.channels)


def normalize_blocks(points: Sequence[ipm.IpPoint], scope: str = "pair"):
    """Component normalisation of block points per controller pair or jointly."""
    points = list(points)
    if scope == "all":
        return ipm.normalize_ip(points, "component")[0]
    if scope != "pair":
        raise ValueError(f"unknown block normalisation scope {scope!r}")
    out = list(points)
    for pair in dict.fromkeys((p.c1, p.c2) for p in points):
        idx = [i for i, p in enumerate(points) if (p.c1, p.c2) == pair]
        norm, _ = ipm.normalize_ip([points[i] for i in idx], "component")
        for i, p in zip(idx, norm):
            out[i] = p
    return out


def stride_table(analyses: Sequence[SubjectAnalysis]) -> pd.DataFrame:
    rows = []
    for a in analyses:
        for r in a.stride_records():
            row = {"subject": a.subject, "controller": r.controller, "speed": r.speed,
                   "stride": r.stride, "duration": r.duration, "mu_total": r.mu_total,
                   "tau_total": r.tau_total}
            row.update({f"tau_{j}": x for j, x in zip(JOINTS, r.tau_per_joint)})
            row.update({f"mu_{c}": x for c, x in zip(a.channels, r.mu_per_muscle)})
            rows.append(row)
    return pd.DataFrame(rows)


def block_table(analyses: Sequence[SubjectAnalysis]) -> pd.DataFrame:
    rows = []
    for a in analyses:
        for b in a.blocks():
            rows.append({"subject": a.subject, "controller": b.controller, "speed": b.speed,
                         "duration": b.duration, "mu_total": b.mu_total,
                         "tau_total": b.tau_total,
                         "eta_total": float(b.eta.sum()) if a.vo2_base else float("nan"),
                         **{f"tau_{j}": x for j, x in zip(JOINTS, b.tau_per_joint)}})
    return pd.DataFrame(rows)


class InconsistentTrialSetError(ValueError):
    pass


def compare_controllers(blocks: pd.DataFrame, metric: str = "mu_total",
                        controllers: Sequence[str] = EXO_CONTROLLERS) -> pd.DataFrame:
    """Friedman test across controllers and Bonferroni-adjusted pairwise
    Wilcoxon tests, per speed, over subjects.

    Every subject must contribute every (controller, speed) block.
    """
    rows = []
    sub = blocks[blocks["controller"].isin(controllers)]
    for v in sorted(sub["speed"].unique()):
        wide = sub[sub["speed"] == v].pivot_table(index="subject", columns="controller",
                                                  values=metric, aggfunc="first")
        wide = wide.reindex(columns=list(controllers))
        if wide.isna().any().any():
            missing = [(s, c) for s in wide.index for c in controllers if pd.isna(wide.at[s, c])]
            raise InconsistentTrialSetError(
                f"{metric} at {v:g} m/s: missing blocks {missing[:5]}")
        x = wide.to_numpy(dtype=float)
        if x.shape[0] < 2:
            raise InconsistentTrialSetError(
                f"group tests need at least 2 subjects, got {x.shape[0]}")
        fr = friedman(x)
        rows.append({"metric": metric, "speed": v, "test": "friedman",
                     "comparison": "/".join(controllers), "statistic": fr.statistic,
                     "p_value": fr.p_value, "method": fr.method, "n": fr.n, "adjusted": False})
        pairs = list(combinations(range(len(controllers)), 2))
        results, names = [], []
        for i, j in pairs:
            try:
                results.append(wilcoxon_signed_rank(x[:, j] - x[:, i]))
            except DegenerateSampleError:  # identical blocks: no evidence of a difference
                results.append(TestResult(0.0, 1.0, "exact", 0))
            names.append(f"{controllers[i]}-{controllers[j]}")
        for name, r in zip(names, adjust(results, len(pairs))):
            rows.append({"metric": metric, "speed": v, "test": "wilcoxon", "comparison": name,
                         "statistic": r.statistic, "p_value": r.p_value, "method": r.method,
                         "n": r.n, "adjusted": r.adjusted})
    return pd.DataFrame(rows)
