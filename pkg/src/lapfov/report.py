"""Figure rendering for batch reports: error traces, misorientation
comparisons, depth-evaluation tables, and heatmap previews, written as PNG
files next to the CSV/text outputs.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _series(trace):
    t = np.array([r.t for r in trace.records])
    ep = np.array([r.e_p for r in trace.records])
    ed = np.array([r.e_d for r in trace.records])
    er = np.array([np.linalg.norm(r.e_r) for r in trace.records])
    theta = np.array([math.degrees(r.theta_star) for r in trace.records])
    mis = np.array([math.degrees(r.misorientation) for r in trace.records])
    v = np.array([r.lyapunov for r in trace.records])
    return t, ep, ed, er, theta, mis, v


def plot_trace(trace, path) -> Path:
    """Error channels of a run, matching the trace CSV columns."""
    t, ep, ed, er, theta, mis, v = _series(trace)
    fig, axes = plt.subplots(4, 1, figsize=(9, 11), sharex=True)

    axes[0].plot(t, ep[:, 0], label="e_p.x", lw=1.2)
    axes[0].plot(t, ep[:, 1], label="e_p.y", lw=1.2)
    axes[0].plot(t, np.hypot(ep[:, 0], ep[:, 1]), "k--", label="|e_p|", lw=1.0)
    axes[0].set_ylabel("pixel error (px)")
    axes[0].legend(loc="upper right", fontsize=8)

    axes[1].plot(t, ed, color="tab:red", lw=1.2)
    axes[1].set_ylabel("depth error (mm)")

    ax2 = axes[2]
    ax2.plot(t, er, color="tab:green", lw=1.2, label="|e_r| (mm)")
    ax2.set_ylabel("RCM deviation (mm)")
    ax2b = ax2.twinx()
    ax2b.plot(t, theta, color="tab:purple", lw=1.0, label="theta* (deg)")
    ax2b.plot(t, mis, color="tab:orange", lw=1.0, label="misorientation (deg)")
    ax2b.set_ylabel("angle (deg)")
    lines, labels = ax2.get_legend_handles_labels()
    lines2, labels2 = ax2b.get_legend_handles_labels()
    ax2.legend(lines + lines2, labels + labels2, loc="upper right", fontsize=8)

    axes[3].semilogy(t, np.maximum(v, 1e-12), color="tab:blue", lw=1.2)
    axes[3].set_ylabel("V (log)")
    axes[3].set_xlabel("time (s)")

    fig.suptitle(f"{trace.name} (seed {trace.seed})")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_misorientation_compare(trace_off, trace_on, path) -> Path:
    """MRC off vs on: externally measured misorientation over time."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for trace, label, color in ((trace_off, "MRC off", "tab:red"),
                                (trace_on, "MRC on", "tab:blue")):
        t = [r.t for r in trace.records]
        mis = [math.degrees(r.misorientation) for r in trace.records]
        ax.plot(t, mis, label=label, color=color, lw=1.3)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("misorientation vs NLS (deg)")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_depth_eval(rows, path) -> Path:
    """Per-band Abs Rel and RMSE bars for the depth sweep."""
    bands = [f"[{r.band[0]:g},{r.band[1]:g}]" for r in rows]
    abs_rel = [r.abs_rel_pct for r in rows]
    rmse = [r.rmse_mm for r in rows]
    x = np.arange(len(rows))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.bar(x, abs_rel, color="tab:blue")
    ax1.set_xticks(x, bands)
    ax1.set_ylabel("Abs Rel (%)")
    ax1.set_xlabel("depth band (mm)")
    ax2.bar(x, rmse, color="tab:orange")
    ax2.set_xticks(x, bands)
    ax2.set_ylabel("RMSE (mm)")
    ax2.set_xlabel("depth band (mm)")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_heatmap(heatmap, path, points=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.8))
    im = ax.imshow(heatmap.values, origin="upper", cmap="hot")
    if points is not None and len(points):
        pts = np.asarray(points)
        ax.plot(pts[:, 0], pts[:, 1], ".", color="cyan", ms=1.5, alpha=0.4)
    fig.colorbar(im, ax=ax, label="preference")
    ax.set_xlabel("u (px)")
    ax.set_ylabel("v (px)")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
