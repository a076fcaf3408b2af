"""Render CLI tables to PNG next to their CSV."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_table"]

_STYLE = {"NOMA": "k-o", "OMA1": "b--s", "OMA2": "r-.^", "NOMA_numerical": "g:x"}


def plot_table(path, x, columns: dict, xlabel: str, ylabel: str,
               logy: bool = False, title: str | None = None) -> Path:
    """Plot each named column against ``x`` and save the figure to ``path``.

    NaN entries (infeasible points) are left as gaps. On a log axis zero
    values are dropped too.
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, y in columns.items():
        y = np.asarray(y, dtype=float)
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.plot(x, y, _STYLE.get(name, "-"), label=name, markersize=4, linewidth=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
