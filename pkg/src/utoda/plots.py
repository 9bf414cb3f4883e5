"""Figure rendering for the report path.

Everything goes through the Agg backend and strips the PNG Software tag, so
re-rendering the same artifacts yields the same bytes.  Figures are meant as
quick visual summaries next to the CSV/JSON, not as a plotting API.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE = {"dpi": 110, "metadata": {"Software": None}}


def _finish(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def render_summary_bars(reports: list[dict], path: str | Path) -> Path:
    """Horizontal log-scale bars: every suite's worst residual vs tolerance."""
    path = Path(path)
    names = [r["name"] for r in reports]
    maxes = np.array([max(r["max_abs"], 1e-18) for r in reports])
    tols = np.array([r["tol"] for r in reports])
    ok = [r["pass"] for r in reports]

    fig, ax = plt.subplots(figsize=(8.0, 0.45 * max(4, len(names)) + 1.2))
    ypos = np.arange(len(names))[::-1]
    colors = ["#2a7f3f" if p else "#b03a2e" for p in ok]
    ax.barh(ypos, maxes, color=colors, height=0.6, zorder=2)
    ax.scatter(tols, ypos, marker="|", s=220, color="#222222", zorder=3,
               label="tolerance")
    ax.set_xscale("log")
    ax.set_yticks(ypos)
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("max |residual|")
    ax.grid(axis="x", which="both", alpha=0.3, zorder=0)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("residual suites vs tolerance")
    fig.tight_layout()
    return _finish(fig, path)


def render_field_heatmaps(fields: dict, grid, path: str | Path,
                          title: str = "") -> Path:
    """One panel per site of a field table, shared color scale per panel."""
    path = Path(path)
    sites = sorted(fields)
    cols = min(3, len(sites))
    rows = (len(sites) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4.0 * cols, 3.4 * rows),
                             squeeze=False)
    extent = (grid.ys[0], grid.ys[-1], grid.xs[0], grid.xs[-1])
    for k, site in enumerate(sites):
        ax = axes[k // cols][k % cols]
        arr = np.asarray(fields[site], dtype=np.float64)
        im = ax.imshow(arr, origin="lower", aspect="auto", extent=extent,
                       cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.9)
        ax.set_title(f"site {site}", fontsize=9)
        ax.set_xlabel("y")
        ax.set_ylabel("x")
    for k in range(len(sites), rows * cols):
        axes[k // cols][k % cols].set_axis_off()
    if title:
        fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    return _finish(fig, path)
