"""Static figures: delineated waveforms and score summaries.

Figures are built on :class:`matplotlib.figure.Figure` directly, so no GUI
backend is touched. SVG output is byte-stable for identical inputs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .evaluation import FIDUCIALS, EvalReport, aggregate
from .signal_io import AnnotationSet, SampledSignal

__all__ = ["plot_delineation", "plot_report", "save_figure"]

MARKERS = {
    "p": ("P", "tab:green", "^"),
    "q": ("Q", "tab:purple", "v"),
    "r": ("R", "tab:red", "o"),
    "s": ("S", "tab:orange", "v"),
    "t": ("T", "tab:blue", "^"),
}

_RC = {
    "svg.hashsalt": "pqrst",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def save_figure(fig: Figure, path) -> None:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    metadata = {"Date": None} if fmt in ("svg", "pdf") else None
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format=fmt, metadata=metadata)


def plot_delineation(
    signal: SampledSignal,
    ann: AnnotationSet,
    start_s: float = 0.0,
    stop_s: Optional[float] = None,
    title: Optional[str] = None,
) -> Figure:
    """Waveform with labelled P/Q/R/S/T markers between ``start_s`` and ``stop_s``."""
    with matplotlib.rc_context(_RC):
        n = len(signal)
        lo = max(0, int(start_s * signal.fs))
        hi = n if stop_s is None else min(n, int(stop_s * signal.fs) + 1)
        t = np.arange(lo, hi) / signal.fs
        y = signal.samples[lo:hi]

        width = min(16.0, max(6.0, 1.2 * (hi - lo) / signal.fs))
        fig = Figure(figsize=(width, 3.2))
        ax = fig.add_subplot(1, 1, 1)
        ax.plot(t, y, color="0.2", linewidth=0.8)
        for name in FIDUCIALS:
            label, color, marker = MARKERS[name]
            idx = np.array([getattr(b, name) for b in ann.beats if getattr(b, name) is not None], dtype=int)
            idx = idx[(idx >= lo) & (idx < hi)]
            if idx.size:
                ax.plot(idx / signal.fs, signal.samples[idx], linestyle="none", marker=marker,
                        color=color, markersize=4, label=label)
        ax.set_xlim(t[0], t[-1] if t.size > 1 else t[0] + 1.0 / signal.fs)
        ax.set_xlabel("time (s)")
        ax.set_ylabel(f"{signal.lead or 'signal'} (mV)")
        ax.set_title(title or ann.record_id or "")
        ax.legend(loc="upper right", ncol=5, frameon=False)
        fig.tight_layout()
    return fig


def plot_report(reports: Iterable[EvalReport], title: str = "") -> Figure:
    """Grouped Se/PPV bars per fiducial, pooled over ``reports``."""
    pooled = aggregate(reports)
    names = [n.upper() for n in FIDUCIALS]
    se = [pooled.per_fiducial[n].se for n in FIDUCIALS]
    ppv = [pooled.per_fiducial[n].ppv for n in FIDUCIALS]
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.0, 3.2))
        ax = fig.add_subplot(1, 1, 1)
        x = np.arange(len(names))
        ax.bar(x - 0.2, se, width=0.4, label="Se", color="tab:blue")
        ax.bar(x + 0.2, ppv, width=0.4, label="PPV", color="tab:orange")
        ax.set_xticks(x)
        ax.set_xticklabels(names)
        ax.set_ylim(0.0, 1.05)
        ax.set_ylabel("score")
        ax.set_title(title)
        ax.legend(loc="lower right", frameon=False)
        fig.tight_layout()
    return fig
