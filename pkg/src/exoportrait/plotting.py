"""SVG figures of block metrics, interaction portraits and gait-phase profiles.

Figures are written deterministically: a fixed SVG hash salt, no creation
date, and text rendered as paths, so identical inputs give identical bytes.
The configuration hash is embedded both as SVG metadata and as a footer.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .ip import QUADRANTS, IpPoint, PhaseEvolution, histogram_edges, polar_histogram  # noqa: E402

CONTROLLER_COLOURS = {"TBC": "#4C72B0", "HTC": "#DD8452", "AMTC": "#55A868", "NONE": "#8C8C8C"}
FIGURE_KINDS = ("bars", "ip_vectors", "ip_polar", "profiles", "phase_evolution")

_RC = {"svg.hashsalt": "exoportrait", "svg.fonttype": "path", "font.size": 9,
       "axes.spines.top": False, "axes.spines.right": False}


def _colour(label: str, k: int = 0) -> str:
    return CONTROLLER_COLOURS.get(label, plt.get_cmap("tab10")(k % 10))


def save_svg(fig, path, config_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if config_hash:
        fig.text(0.99, 0.005, f"config {config_hash}", ha="right", va="bottom",
                 fontsize=6, color="0.5")
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Creator": "exoportrait",
                              "Description": f"config_hash={config_hash}"})
    plt.close(fig)
    return path


def _figure(*args, **kw):
    with plt.rc_context(_RC):
        return plt.subplots(*args, **kw)


def block_bars(blocks: pd.DataFrame, path, config_hash: str = "") -> Path:
    """Grouped bars of total interaction torque, muscle effort and normalised
    VO2 per speed and controller (mean over subjects, sd whiskers)."""
    metrics = [("tau_total", "interaction torque [N*m]"), ("mu_total", "muscle effort [-]"),
               ("eta_total", "normalised VO2 [-]")]
    fig, axes = _figure(1, 3, figsize=(10, 3.2))
    ctrls = [c for c in dict.fromkeys(blocks["controller"])]
    speeds = sorted(blocks["speed"].unique())
    width = 0.8 / max(len(ctrls), 1)
    for ax, (col, label) in zip(axes, metrics):
        for k, c in enumerate(ctrls):
            sub = blocks[blocks["controller"] == c]
            g = sub.groupby("speed")[col]
            mean = g.mean().reindex(speeds)
            sd = g.std(ddof=0).reindex(speeds).fillna(0.0)
            x = np.arange(len(speeds)) + (k - (len(ctrls) - 1) / 2) * width
            ax.bar(x, mean.to_numpy(), width, yerr=sd.to_numpy(), color=_colour(c, k),
                   label=c, capsize=2)
        ax.set_xticks(np.arange(len(speeds)))
        ax.set_xticklabels([f"{v:g} m/s" for v in speeds])
        ax.set_ylabel(label)
    axes[0].legend(frameon=False)
    fig.tight_layout()
    return save_svg(fig, path, config_hash)


def _quadrant_labels(ax, r=1.05):
    pos = {1: (0.6, 0.95), 2: (-0.6, 0.95), 3: (-0.6, -0.95), 4: (0.6, -0.95)}
    for q, name in QUADRANTS.items():
        x, y = pos[q]
        ax.text(x * r, y * r, name, ha="center", va="center", fontsize=7, color="0.4")


def ip_vectors(points: Sequence[IpPoint], path, config_hash: str = "") -> Path:
    """Block-level portrait: one arrow per (pair, speed, subject) from the origin."""
    fig, ax = _figure(figsize=(5.2, 5))
    pairs = list(dict.fromkeys((p.c1, p.c2) for p in points))
    markers = {0.4: "o", 0.6: "s", 0.8: "^"}
    for k, pair in enumerate(pairs):
        col = plt.get_cmap("tab10")(k % 10)
        for p in (p for p in points if (p.c1, p.c2) == pair):
            ax.annotate("", (p.d_tau, p.d_mu), (0, 0),
                        arrowprops=dict(arrowstyle="->", color=col, lw=1.2))
            ax.plot(p.d_tau, p.d_mu, markers.get(round(p.speed, 1), "o"), color=col, ms=4)
        ax.plot([], [], color=col, label=f"{pair[0]} -> {pair[1]}")
    ax.axhline(0, color="0.6", lw=0.6)
    ax.axvline(0, color="0.6", lw=0.6)
    ax.set_xlim(-1.15, 1.15)
    ax.set_ylim(-1.15, 1.15)
    ax.set_aspect("equal")
    ax.set_xlabel("normalised change in interaction torque")
    ax.set_ylabel("normalised change in muscle effort")
    _quadrant_labels(ax)
    ax.legend(frameon=False, loc="center left", bbox_to_anchor=(1.0, 0.5))
    fig.tight_layout()
    return save_svg(fig, path, config_hash)


def ip_polar(groups: Mapping[str, Sequence[IpPoint]], path, bin_width: float = math.pi / 6,
             config_hash: str = "") -> Path:
    """Stride-wise portrait per group: polar scatter (top) and phase histogram (bottom)."""
    names = list(groups)
    n = max(len(names), 1)
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=(3.4 * n, 6.4))
    edges = histogram_edges(bin_width)
    for k, name in enumerate(names):
        pts = [p for p in groups[name] if p.radius > 0]
        ax = fig.add_subplot(2, n, k + 1, projection="polar")
        ax.scatter([p.phase for p in pts], [p.radius for p in pts], s=6,
                   color=_colour(name.split()[-1], k), alpha=0.7)
        ax.set_ylim(0, 1.05)
        ax.set_title(name, fontsize=9)
        hx = fig.add_subplot(2, n, n + k + 1, projection="polar")
        counts = polar_histogram(groups[name], bin_width)
        hx.bar(edges[:-1] + bin_width / 2, counts, width=bin_width, color=_colour(name.split()[-1], k),
               edgecolor="white", alpha=0.8)
        hx.set_yticklabels([])
    fig.tight_layout()
    return save_svg(fig, path, config_hash)


def phase_profiles(profiles: Mapping[str, tuple], path, channels: Sequence[str],
                   ylabel: str = "", config_hash: str = "") -> Path:
    """Mean and sd band over the gait phase, one panel per channel.

    ``profiles`` maps a label to ``(phi, mean, sd)`` with ``mean`` of shape
    ``(points, len(channels))``.
    """
    fig, axes = _figure(1, len(channels), figsize=(3.2 * len(channels), 3), squeeze=False)
    for c, ax in enumerate(axes[0]):
        for k, (label, (phi, mean, sd)) in enumerate(profiles.items()):
            col = _colour(label, k)
            ax.plot(phi * 100, mean[:, c], color=col, label=label, lw=1.2)
            ax.fill_between(phi * 100, mean[:, c] - sd[:, c], mean[:, c] + sd[:, c],
                            color=col, alpha=0.2, lw=0)
        ax.set_title(channels[c])
        ax.set_xlabel("gait phase [%]")
    axes[0][0].set_ylabel(ylabel)
    axes[0][-1].legend(frameon=False)
    fig.tight_layout()
    return save_svg(fig, path, config_hash)


def phase_evolution(series: Mapping[str, PhaseEvolution], path, config_hash: str = "") -> Path:
    """Stride-wise IP phase with its circular running mean."""
    fig, ax = _figure(figsize=(7, 3.2))
    for k, (label, ev) in enumerate(series.items()):
        col = _colour(label.split()[-1], k)
        ax.plot(ev.stride, np.degrees(ev.phase), ".", color=col, ms=3, alpha=0.5)
        ax.plot(ev.stride, np.degrees(ev.running_mean), "-", color=col, lw=1.4, label=label)
    for y in (-90, 0, 90):
        ax.axhline(y, color="0.8", lw=0.6)
    ax.set_ylim(-180, 180)
    ax.set_yticks([-180, -90, 0, 90, 180])
    ax.set_xlabel("stride")
    ax.set_ylabel("IP phase [deg]")
    ax.legend(frameon=False)
    fig.tight_layout()
    return save_svg(fig, path, config_hash)
