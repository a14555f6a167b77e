"""PNG rendering of scenario series.

Figures go through the Agg canvas directly (pyplot is never imported, so the
caller's backend is untouched) and the PNG text chunks are dropped, which makes
the files byte-identical between re-runs on the same matplotlib build.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

golden = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "path.simplify": False,
}


@dataclass(frozen=True)
class FigureSpec:
    name: str  # file stem
    x: np.ndarray
    series: tuple  # ((label, y), ...)
    xlabel: str = "t"
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    title: str = ""
    style: str = "-"


def render(spec: FigureSpec, out_dir) -> Path:
    path = Path(out_dir) / f"{spec.name}.png"
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(RC):
        fig = Figure(figsize=(fig_width, fig_width * golden))
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)
        x = np.asarray(spec.x, float)
        for label, y in spec.series:
            y = np.asarray(y, float)
            if spec.logy:
                # log axes cannot show non-positive samples
                y = np.where(y > 0, y, np.nan)
            ax.plot(x, y, spec.style, label=label)
        if spec.logx:
            ax.set_xscale("log")
        if spec.logy:
            ax.set_yscale("log")
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        if spec.title:
            ax.set_title(spec.title)
        if len(spec.series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="png", metadata={"Software": None})
    return path


def render_all(specs, out_dir):
    return [render(s, out_dir) for s in specs]
