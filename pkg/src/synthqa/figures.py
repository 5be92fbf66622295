"""Matplotlib figure rendering for pipeline reports.

Each figure is written next to its delimited counterpart (CSV/SVG) so a run
directory is browsable without any tooling. Rendering uses the Agg backend
and fixed styling, which keeps the PNG bytes identical across repeated runs
with the same data.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .projection import PALETTE

_FIGSIZE = (6.4, 4.8)
_DPI = 100


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def scatter_figure(
    coords: np.ndarray | Sequence[Sequence[float]],
    labels: Sequence[str],
    path: str | Path,
    title: str,
) -> Path:
    """Labeled 2D scatter with the same palette as the SVG export."""
    coords = np.asarray(coords, dtype=np.float64)
    label_order: list[str] = []
    for label in labels:
        if label not in label_order:
            label_order.append(label)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for i, label in enumerate(label_order):
        mask = np.array([lab == label for lab in labels])
        pts = coords[mask] if len(coords) else np.empty((0, 2))
        ax.scatter(pts[:, 0], pts[:, 1], s=22, alpha=0.8,
                   color=PALETTE[i % len(PALETTE)], label=label)
    ax.set_title(title)
    ax.set_xlabel("dim 1")
    ax.set_ylabel("dim 2")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def histogram_figure(
    counts: Sequence[int],
    path: str | Path,
    threshold: float | None = None,
    title: str = "Question-to-chunk cosine similarity",
) -> Path:
    """Bar rendering of the 20-bin similarity histogram over [0, 1]."""
    counts = list(counts)
    bins = len(counts)
    width = 1.0 / bins
    lefts = np.arange(bins) * width
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.bar(lefts, counts, width=width, align="edge", color=PALETTE[0], edgecolor="white")
    if threshold is not None:
        ax.axvline(threshold, color=PALETTE[3], linestyle="--", linewidth=1.2,
                   label=f"threshold {threshold:.2f}")
        ax.legend(fontsize=8)
    ax.set_xlim(0.0, 1.0)
    ax.set_title(title)
    ax.set_xlabel("cosine similarity")
    ax.set_ylabel("pairs")
    fig.tight_layout()
    return _save(fig, path)
