"""Command-line front end.

Subcommands::

    simulate   run trial blocks and write their file sets
    analyze    stride and block metric tables
    ip         interaction-portrait points for one controller pair
    stats      Friedman and pairwise Wilcoxon tests across subjects
    report     all tables, the five figure types and a text summary

Outputs go under ``--out``, else ``$EXOPORTRAIT_OUTPUT``, else
``./exoportrait-out``; trials live in ``<out>/trials/<subject>/<block>/``.
Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from . import analysis as an
from . import plotting
from .config import ConfigError, config_hash, load_config, model_from_dict
from .dynamics import JOINTS
from .io import TrialFileError, ingest_trial, write_frame, write_trial
from .ip import (MissingBlockError, normalize_ip, phase_evolution, points_table,
                 polar_histogram, mode_bin)
from .scenarios import leader, protocol_jobs, run_many
from .sim.human import KINDS, HumanPolicy
from .sim.loop import TrialAbortedError
from .sim.trial import PROTOCOL

log = logging.getLogger("exoportrait")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
OUTPUT_ENV = "EXOPORTRAIT_OUTPUT"
DEMO_SCHEDULE = ((0.4, 20.0), (0.6, 20.0), (0.8, 20.0))

UNITS = {"speed": "m/s", "duration": "s", "tau_total": "N*m", "d_tau": "1", "d_mu": "1",
         "radius": "1", "phase": "rad", "eta_total": "1", "statistic": "1", "p_value": "1",
         **{f"tau_{j}": "N*m" for j in JOINTS}}


class UsageError(ValueError):
    """Inconsistent request that argparse cannot catch."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ------------------------------------------------------------------ helpers
def output_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ENV, "exoportrait-out"))


def parse_schedule(text: str) -> tuple:
    """``"0.4:100,0.6:100"`` -> ``((0.4, 100.0), (0.6, 100.0))``."""
    try:
        out = tuple((float(a), float(b)) for a, b in (p.split(":") for p in text.split(",")))
    except ValueError as exc:
        raise UsageError(f"malformed schedule {text!r}; expected speed:duration,...") from exc
    if not out or any(v <= 0 or d <= 0 for v, d in out):
        raise UsageError("schedule speeds and durations must be positive")
    return out


def trial_kwargs(cfg: dict) -> dict:
    """TrialConfig fields taken from the configuration file."""
    a = cfg["controllers"]["amtc"]
    h = cfg["human"]
    return {"body_mass": h["body_mass"], "exo_mass": h["exo_mass"],
            "gain_jitter": h["gain_jitter"], "htc_w": cfg["controllers"]["htc"]["w"],
            "amtc_harmonics": int(a["harmonics"]), "amtc_epsilon": a["epsilon"],
            "amtc_r0_speed": a["r0_speed"], "amtc_dc": bool(a["dc"]), "amtc_guard": a["guard"],
            "amtc_rate_cutoff": a["rate_cutoff"]}


def find_trials(root: Path) -> List[Path]:
    if not root.exists():
        raise UsageError(f"trial directory {root} does not exist")
    found = sorted(p.parent for p in root.rglob("trial.json"))
    if not found:
        raise UsageError(f"no trials under {root}")
    return found


def load_analyses(args, cfg) -> List[an.SubjectAnalysis]:
    model = model_from_dict(cfg["model"])
    root = Path(args.trials) if args.trials else output_root(args) / "trials"
    by_subject: Dict[str, list] = {}
    for d in find_trials(root):
        trial = ingest_trial(d, model=model, emg=not args.no_emg)
        by_subject.setdefault(trial.subject, []).append(trial)
    out = []
    for subject in sorted(by_subject):
        out.append(an.analyze_subject(by_subject[subject], cfg, need_emg=not args.no_emg))
        by_subject[subject] = None  # release the raw streams
    return out


def _tag(cfg_hash: str) -> dict:
    return {"config_hash": cfg_hash, "generator": f"exoportrait {__version__}"}


def _write(path: Path, frame: pd.DataFrame, cfg_hash: str) -> Path:
    write_frame(path, frame, UNITS, _tag(cfg_hash))
    log.info("wrote %s", path)
    return path


def _require_emg(args, what: str):
    if args.no_emg:
        raise UsageError(f"{what} needs muscle effort, which is unavailable with --no-emg")


# ----------------------------------------------------------------- commands
def cmd_simulate(args, cfg, h) -> int:
    root = output_root(args) / "trials"
    schedule = parse_schedule(args.schedule) if args.schedule else (
        DEMO_SCHEDULE if args.demo else PROTOCOL)
    simulate_set(root, cfg, h, schedule, args.controllers, args.policy, args.seed,
                 args.subjects, not args.no_natural, not args.no_emg, args.workers)
    return EXIT_OK


def simulate_set(root: Path, cfg, h, schedule, controllers, policy_kind, seed, subjects,
                 natural, emg, workers) -> None:
    model = model_from_dict(cfg["model"])
    policy = leader() if policy_kind == "leader" else HumanPolicy.of_kind(policy_kind)
    jobs = []
    for k in range(subjects):
        jobs += protocol_jobs(seed + k, policy, schedule, tuple(controllers), natural,
                              subject=f"S{k + 1}", emg=emg, **trial_kwargs(cfg))
    trials = run_many(jobs, workers, model)
    for t in trials:
        t.meta["trial_hash"] = t.meta["config_hash"]
        t.meta["config_hash"] = h
        d = write_trial(t, root / t.subject / an.condition(t))
        log.info("wrote %s", d)


def cmd_analyze(args, cfg, h) -> int:
    out = output_root(args)
    analyses = load_analyses(args, cfg)
    write_analysis_tables(analyses, out, h)
    return EXIT_OK


def write_analysis_tables(analyses, out: Path, h: str) -> dict:
    strides = an.stride_table(analyses)
    blocks = an.block_table(analyses)
    paths = {"strides": _write(out / "strides.csv", strides, h),
             "blocks": _write(out / "blocks.csv", blocks, h)}
    grf = [a.grf_correlations() for a in analyses if a.grf_reference]
    if grf:
        paths["grf"] = _write(out / "grf_correlation.csv", pd.concat(grf, ignore_index=True), h)
    return {"strides": strides, "blocks": blocks, "paths": paths}


def block_points(analyses, pairs, scope: str):
    pts = []
    for a in analyses:
        pts += a.ip_blocks(pairs)
    return an.normalize_blocks(pts, scope)


def stride_points(analyses, c1: str, c2: str, steady: float):
    pts = []
    for a in analyses:
        pts += a.ip_strides(c2, c1, steady)
    return pts


def cmd_ip(args, cfg, h) -> int:
    _require_emg(args, "the interaction portrait")
    c1, c2 = args.pair
    analyses = load_analyses(args, cfg)
    out = output_root(args)
    if args.level == "block":
        pts = block_points(analyses, [(c1, c2)], cfg["ip"]["block_scope"])
    else:
        steady = cfg["ip"]["steady_state_fraction"] if args.steady else 0.0
        pts, degenerate = normalize_ip(stride_points(analyses, c1, c2, steady), "radius")
        if degenerate:
            log.warning("all stride points are at the origin")
    _write(out / f"ip_{args.level}_{c1}_{c2}.csv", points_table(pts), h)
    return EXIT_OK


def cmd_stats(args, cfg, h) -> int:
    metrics = args.metric
    if "mu_total" in metrics:
        _require_emg(args, "the muscle-effort test")
    analyses = load_analyses(args, cfg)
    blocks = an.block_table(analyses)
    res = pd.concat([an.compare_controllers(blocks, m, args.controllers) for m in metrics],
                    ignore_index=True)
    _write(output_root(args) / "stats.csv", res, h)
    return EXIT_OK


def cmd_report(args, cfg, h) -> int:
    out = output_root(args)
    if args.simulate:
        schedule = DEMO_SCHEDULE if args.simulate == "demo" else PROTOCOL
        simulate_set(out / "trials", cfg, h, schedule, ("TBC", "HTC", "AMTC"), "leader",
                     args.seed, args.subjects, True, True, args.workers)
    analyses = load_analyses(args, cfg)
    build_report(analyses, out, cfg, h)
    return EXIT_OK


def build_report(analyses, out: Path, cfg: dict, h: str) -> Path:
    tabs = write_analysis_tables(analyses, out, h)
    blocks = tabs["blocks"]
    exo = blocks[blocks["controller"].isin(an.EXO_CONTROLLERS)]
    fig = out / "figures"
    lines = [f"exoportrait {__version__} report", f"config_hash={h}",
             f"subjects={len(analyses)}", ""]

    plotting.block_bars(exo, fig / "bars.svg", h)

    bpts = block_points(analyses, an.PAIRS, cfg["ip"]["block_scope"])
    _write(out / "ip_block.csv", points_table(bpts), h)
    plotting.ip_vectors(bpts, fig / "ip_vectors.svg", h)
    lines.append("block interaction portrait (normalised):")
    for p in bpts:
        lines.append(f"  {p.subject} {p.c1}->{p.c2} {p.speed:g} m/s  d_tau={p.d_tau:+.3f} "
                     f"d_mu={p.d_mu:+.3f}  {p.quadrant}")

    steady = cfg["ip"]["steady_state_fraction"]
    groups, evo = {}, {}
    raw = {c2: stride_points(analyses, "TBC", c2, 0.0) for c2 in ("HTC", "AMTC")}
    allpts, _ = normalize_ip([p for c2 in raw for p in raw[c2]], "radius")
    k = 0
    for c2 in raw:
        pts = allpts[k:k + len(raw[c2])]
        k += len(raw[c2])
        label = f"TBC -> {c2}"
        groups[label] = pts
        _write(out / f"ip_stride_TBC_{c2}.csv", points_table(pts), h)
        first = [p for p in pts if p.subject == analyses[0].subject]
        evo[label] = phase_evolution(first, int(cfg["ip"]["running_window"]))
        late = [p for p in stride_points(analyses, "TBC", c2, steady)]
        counts = polar_histogram(late)
        lo, hi = mode_bin(counts)
        lines.append(f"stride IP {label}: {len(pts)} strides, steady-state mode bin "
                     f"[{np.degrees(lo):.0f}, {np.degrees(hi):.0f}) deg")
    plotting.ip_polar(groups, fig / "ip_polar.svg", config_hash=h)
    plotting.phase_evolution(evo, fig / "phase_evolution.svg", h)

    speeds = analyses[0].speeds()
    v = speeds[len(speeds) // 2]
    prof = {}
    for ts in analyses[0].trials:
        if ("u_int", v) in ts.profiles:
            m, sd = ts.profiles[("u_int", v)]
            prof[ts.controller] = (np.linspace(0, 1, len(m)), m[:, :2], sd[:, :2])
    plotting.phase_profiles(prof, fig / "profiles.svg", ["hip_right", "knee_right"],
                            f"interaction torque at {v:g} m/s [N*m]", h)

    lines += ["", "block metrics:"]
    lines += ["  " + r for r in exo[["subject", "controller", "speed", "tau_total", "mu_total",
                                      "eta_total"]].to_string(index=False).splitlines()]
    lines.append("")
    if len(analyses) >= 2:
        res = pd.concat([an.compare_controllers(blocks, m) for m in ("mu_total", "tau_total")],
                        ignore_index=True)
        _write(out / "stats.csv", res, h)
        lines += ["group tests:"] + ["  " + r for r in res.to_string(index=False).splitlines()]
    else:
        lines.append("group tests: skipped (need at least 2 subjects)")
    path = out / "report.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


# ------------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="exoportrait", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (overrides defaults)")
    common.add_argument("--out", help=f"output root (default ${OUTPUT_ENV} or ./exoportrait-out)")
    common.add_argument("--no-emg", action="store_true",
                        help="work without EMG; muscle-effort outputs are refused")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate trial blocks")
    s.add_argument("--controllers", nargs="+", default=["TBC", "HTC", "AMTC"],
                   choices=["TBC", "HTC", "AMTC"])
    s.add_argument("--no-natural", action="store_true", help="skip the natural-walking block")
    s.add_argument("--policy", choices=KINDS, default="leader")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--subjects", type=int, default=1)
    s.add_argument("--schedule", help="speed:duration,... (default 0.4:100,0.6:100,0.8:100)")
    s.add_argument("--demo", action="store_true", help="short 3 x 20 s schedule")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    for name, fn, text in (("analyze", cmd_analyze, "stride and block metric tables"),
                           ("ip", cmd_ip, "interaction portrait of one pair"),
                           ("stats", cmd_stats, "group tests across subjects"),
                           ("report", cmd_report, "tables, figures and summary")):
        c = sub.add_parser(name, parents=[common], help=text)
        c.add_argument("--trials", help="trial root (default <out>/trials)")
        c.set_defaults(func=fn)
        if name == "ip":
            c.add_argument("--pair", nargs=2, metavar=("C1", "C2"), default=["TBC", "AMTC"])
            c.add_argument("--level", choices=["block", "stride"], default="block")
            c.add_argument("--steady", action="store_true",
                           help="stride level: drop the leading part of every segment")
        if name == "stats":
            c.add_argument("--metric", nargs="+", default=["mu_total", "tau_total"],
                           choices=["mu_total", "tau_total", "eta_total"])
            c.add_argument("--controllers", nargs="+", default=list(an.EXO_CONTROLLERS))
        if name == "report":
            c.add_argument("--simulate", choices=["demo", "protocol"],
                           help="simulate the demo (3 x 20 s) or full protocol set first")
            c.add_argument("--seed", type=int, default=0)
            c.add_argument("--subjects", type=int, default=1)
            c.add_argument("--workers", type=int, default=1)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"exoportrait: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        h = config_hash(cfg)
        return args.func(args, cfg, h)
    except (UsageError, ConfigError, TrialFileError, an.MissingEmgError,
            an.InconsistentTrialSetError, MissingBlockError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        code = getattr(exc, "code", "invalid-input")
        print(f"exoportrait: error [{code}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TrialAbortedError, Exception) as exc:  # noqa: BLE001
        print(f"exoportrait: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
