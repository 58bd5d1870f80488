"""Figure rendering for result tables.

Pure file output on the Agg backend; every function takes already
computed rows and a target path, so the plots never feed back into the
numbers they describe.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .domain import non_dominated_mask

__all__ = [
    "render_accuracy",
    "render_bo_curves",
    "render_dimension_table",
    "render_objective_cloud",
]

_GRAY = "0.65"


def _save(fig, path: "str | Path") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_objective_cloud(
    coords: np.ndarray, values: np.ndarray, path: "str | Path"
) -> None:
    """Objective-space scatter of a dataset, best options highlighted."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    values = np.atleast_2d(np.asarray(values, dtype=float))
    mask = non_dominated_mask(values)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    if values.shape[1] >= 2:
        ax.scatter(values[~mask, 0], values[~mask, 1], s=12, color=_GRAY, label="dominated")
        ax.scatter(values[mask, 0], values[mask, 1], s=18, color="C3", label="non-dominated")
        ax.set_xlabel("objective 1")
        ax.set_ylabel("objective 2")
    else:
        order = np.argsort(coords[:, 0])
        ax.plot(coords[order, 0], values[order, 0], lw=0.8, color=_GRAY)
        ax.scatter(coords[mask, 0], values[mask, 0], s=18, color="C3", label="non-dominated")
        ax.set_xlabel("x")
        ax.set_ylabel("objective")
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def render_accuracy(columns: Mapping[str, Sequence[float]], path: "str | Path") -> None:
    """Per-repetition accuracies as points over the column means."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    names = list(columns)
    for i, name in enumerate(names):
        vals = np.asarray(columns[name], dtype=float)
        ax.bar(i, vals.mean(), width=0.6, color="C0", alpha=0.35)
        ax.scatter(np.full(vals.shape, i), vals, s=16, color="C0", zorder=3)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("test accuracy")
    _save(fig, path)


def render_bo_curves(curves: Mapping[str, Sequence[Sequence[float]]], path: "str | Path") -> None:
    """Hypervolume-gap trajectories: thin repetitions, bold medians."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for i, (name, reps) in enumerate(curves.items()):
        color = f"C{i}"
        for rep in reps:
            ax.plot(range(len(rep)), rep, lw=0.7, alpha=0.3, color=color)
        stacked = np.asarray(reps, dtype=float)
        ax.plot(
            range(stacked.shape[1]), np.median(stacked, axis=0),
            lw=2.0, color=color, label=name,
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("log10 hypervolume gap")
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def render_dimension_table(
    per_rep: Mapping[int, Sequence[tuple]], path: "str | Path"
) -> None:
    """PSIS-LOO totals per candidate dimension, chosen dimension circled."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for rep, rows in sorted(per_rep.items()):
        dims = [r[0] for r in rows]
        totals = [r[1] for r in rows]
        ax.plot(dims, totals, marker=".", lw=0.9, alpha=0.7, label=f"rep {rep}")
        for dim, total, selected in rows:
            if selected:
                ax.scatter([dim], [total], s=90, facecolors="none", edgecolors="C3", zorder=3)
    ax.set_xlabel("latent dimension")
    ax.set_ylabel("PSIS-LOO total")
    ax.xaxis.set_major_locator(plt.MaxNLocator(integer=True))
    ax.legend(loc="best", fontsize=7)
    _save(fig, path)
