"""Figure rendering for the report bundle.

Renders the plot-ready CSV content to PNG files with a non-interactive
backend: endpoint clusters in the reduced space, the persistence barcode,
and a parameter-sweep heatmap.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

from .stats import SweepTable
from .topology import PersistenceDiagram

DPI = 150


def plot_endpoint_clusters(endpoints: np.ndarray, labels: np.ndarray, path) -> None:
    """Scatter of reduced endpoints colored by cluster label."""
    endpoints = np.asarray(endpoints)
    fig, ax = plt.subplots(figsize=(6, 5))
    ys = endpoints[:, 1] if endpoints.shape[1] > 1 else np.zeros(len(endpoints))
    for label in np.unique(labels):
        mask = labels == label
        ax.scatter(endpoints[mask, 0], ys[mask], s=18, alpha=0.8,
                   label=f"cluster {int(label)}")
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.set_title("trajectory endpoints by cluster")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)


def plot_barcode(diagram: PersistenceDiagram, path) -> None:
    """Horizontal persistence bars, one panel per homology dimension."""
    dims = sorted({b.dim for b in diagram.bars}) or [0]
    finite_deaths = [b.death for b in diagram.bars if b.finite]
    births = [b.birth for b in diagram.bars]
    top = max(finite_deaths + births + [1.0])
    cap = top * 1.05  # stand-in length for infinite bars
    fig, axes = plt.subplots(len(dims), 1, figsize=(6, 2.2 * len(dims)),
                             squeeze=False, sharex=True)
    flags = diagram.significant or [False] * len(diagram.bars)
    for ax, dim in zip(axes[:, 0], dims):
        rows = [(b, f) for b, f in zip(diagram.bars, flags) if b.dim == dim]
        rows.sort(key=lambda bf: (bf[0].birth, bf[0].death))
        for i, (bar, flag) in enumerate(rows):
            death = bar.death if bar.finite else cap
            ax.hlines(i, bar.birth, death,
                      colors="tab:red" if flag else "tab:blue",
                      linewidth=2.0 if flag else 1.2)
            if not bar.finite:
                ax.plot([death], [i], marker=">", color="tab:blue", markersize=4)
        ax.set_ylabel(f"H{dim}")
        ax.set_ylim(-1, max(len(rows), 1))
    axes[-1, 0].set_xlabel("filtration radius")
    axes[0, 0].set_title("persistence barcode (significant bars in red)")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)


def plot_sweep_heatmap(table: SweepTable, column: str, path) -> None:
    """Grid heatmap of a per-cell mean over (temperature, top_p)."""
    temps = sorted({c.temperature for c in table.rows})
    tops = sorted({c.top_p for c in table.rows})
    grid = np.full((len(tops), len(temps)), math.nan)
    for cell in table.rows:
        if column in cell.means:
            grid[tops.index(cell.top_p), temps.index(cell.temperature)] = cell.means[column]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    im = ax.imshow(grid, aspect="auto", origin="lower", cmap="viridis")
    ax.set_xticks(range(len(temps)), [f"{t:g}" for t in temps], rotation=45)
    ax.set_yticks(range(len(tops)), [f"{p:g}" for p in tops])
    ax.set_xlabel("temperature")
    ax.set_ylabel("top_p")
    ax.set_title(f"mean {column} per grid cell")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)
