"""SVG figures: line/scatter plots and event timelines."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "bds-sim"  # stable element ids across runs
import matplotlib.pyplot as plt  # noqa: E402

from .engine import BdsPath  # noqa: E402
from .events import event_space  # noqa: E402

_SVG_META = {"Date": None, "Creator": None}


def emit_plot(series: Sequence[tuple[Sequence[float], Sequence[float]]], labels: Sequence[str], path,
              title: str = "", xlabel: str = "", ylabel: str = "", logx: bool = False,
              logy: bool = False) -> Path:
    """Write a self-contained SVG with one line+marker trace per ``(x, y)`` series."""
    if not series:
        raise ValueError("nothing to plot")
    if len(labels) != len(series):
        raise ValueError("need one label per series")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for (x, y), label in zip(series, labels):
        ax.plot(list(x), list(y), marker="o", label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def emit_timeline(path_obj: BdsPath, out, title: str = "") -> Path:
    """Event times on one axis: swaps in red, demographic events in blue."""
    space = event_space(path_obj.p)
    times = path_obj.times
    swap = path_obj.events < space.n_swaps
    out = Path(out)
    fig, ax = plt.subplots(figsize=(8, 1.8))
    ax.vlines(times[swap], -0.4, 0.4, colors="tab:red", linewidth=0.8, label="swap")
    ax.vlines(times[~swap], -0.8, 0.8, colors="tab:blue", linewidth=1.6, label="birth/death")
    ax.axhline(0, color="black", linewidth=0.8)
    ax.set_xlim(0, path_obj.horizon)
    ax.set_ylim(-1, 1)
    ax.set_yticks([])
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return out
