"""Matplotlib report figures, written next to the delimited outputs.

All figures are rendered headless (Agg) with pinned size, dpi and metadata
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PNG_META = {"Software": "cpnav"}
DPI = 110


def _save(fig, out_path):
    fig.savefig(out_path, metadata=PNG_META, dpi=DPI)
    plt.close(fig)


def boxplot_figure(gens, stats_list, ylabel: str, title: str, out_path,
                   phase_boundary: int = 0) -> None:
    """Box-and-whisker series over sampled generations from BoxStats rows."""
    boxes = [{
        "med": s.median, "mean": s.mean, "q1": s.q1, "q3": s.q3,
        "whislo": s.whisker_lo, "whishi": s.whisker_hi,
        "fliers": list(s.outliers), "label": str(g),
    } for g, s in zip(gens, stats_list)]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.28 * len(boxes) + 2.0), 4.0))
    ax.bxp(boxes, showmeans=True, meanprops={"marker": "*", "markersize": 5})
    if phase_boundary and gens:
        marks = [i + 1 for i, g in enumerate(gens) if g > phase_boundary]
        if marks and marks[0] > 1:
            ax.axvline(marks[0] - 0.5, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("generation")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.tick_params(axis="x", labelrotation=90, labelsize=7)
    fig.tight_layout()
    _save(fig, out_path)


def fronts_figure(run_fronts, accumulated, title: str, out_path) -> None:
    """Scatter of every run's final front plus the accumulated front."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    cmap = plt.get_cmap("tab20")
    for i, pts in enumerate(run_fronts):
        pts = np.asarray(pts).reshape(-1, 2)
        if pts.size:
            ax.scatter(pts[:, 0], pts[:, 1], s=14, color=cmap(i % 20), alpha=0.7)
    acc = np.asarray(accumulated).reshape(-1, 2)
    if acc.size:
        order = np.argsort(acc[:, 0])
        ax.plot(acc[order, 0], acc[order, 1], "k-o", markersize=4, linewidth=1.0,
                label="accumulated front")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("f1 (speed / safety)")
    ax.set_ylabel("f2 (target seeking)")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, out_path)


def curves_figure(xs, series: dict, xlabel: str, ylabel: str, title: str, out_path,
                  phase_boundary: int = 0) -> None:
    """Simple labelled line curves (e.g. reached-target fraction per arm)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, ys in series.items():
        ax.plot(xs, ys, label=label)
    if phase_boundary:
        ax.axvline(phase_boundary, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if ylabel.startswith("fraction"):
        ax.set_ylim(-0.02, 1.05)
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def paths_figure(maze, paths: dict, title: str, out_path) -> None:
    """Maze outline with one or more labelled robot paths."""
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for wall in maze.walls:
        ax.plot([wall[0], wall[2]], [wall[1], wall[3]], color="#333333", linewidth=1.5)
    ax.scatter(maze.targets[:, 0], maze.targets[:, 1], s=30, color="#e08020",
               zorder=3, label="targets")
    for p in maze.starts:
        ax.plot(p.x, p.y, "g^", markersize=7, zorder=3)
    for label, path in paths.items():
        path = np.asarray(path)
        ax.plot(path[:, 0], path[:, 1], linewidth=1.2, label=label)
    ax.set_aspect("equal")
    ax.set_xlabel("x (cm)")
    ax.set_ylabel("y (cm)")
    ax.set_title(title)
    if paths:
        ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    _save(fig, out_path)
