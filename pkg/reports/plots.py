"""
Static SVG figures. Rendering is headless and the SVG output is deterministic
(fixed hash salt, no date stamp), so repeated runs write identical files.
"""
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "promptcal",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (4.5, 4.0),
})

SVG_METADATA = {"Date": None}


def save_svg(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA, bbox_inches="tight")
    plt.close(fig)
    return path


def reliability_figure(bins: pd.DataFrame, title: str = ""):
    """Observed unsafe frequency against mean confidence per occupied bin, with the diagonal."""
    fig, ax = plt.subplots()
    widths = (bins["upper"] - bins["lower"]).to_numpy()
    ax.bar(bins["lower"], bins["freq"], width=widths, align="edge",
           color="tab:blue", alpha=0.35, edgecolor="tab:blue", label="frequency")
    ax.plot(bins["conf"], bins["freq"], marker="o", color="tab:blue", linewidth=1.2, label="bins")
    ax.plot([0, 1], [0, 1], color="tab:red", linestyle="-.", linewidth=1.0, label="ideal")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("mean p(unsafe)")
    ax.set_ylabel("observed unsafe rate")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    return fig


def coverage_figure(curves: Mapping[str, pd.DataFrame], metric: str = "error", title: str = ""):
    """Retained-set risk against coverage, one line per uncertainty signal."""
    fig, ax = plt.subplots()
    for signal, frame in curves.items():
        ax.plot(frame["coverage"], frame[metric], marker="o", markersize=3, linewidth=1.2, label=signal)
    ax.set_xlim(1.0, min(float(frame["coverage"].min()) for frame in curves.values()) - 0.02)
    ax.set_xlabel("coverage")
    ax.set_ylabel(f"selective {metric}")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return fig
