"""SVG figures for sweep results.

Output is deterministic: fixed hash salt, no date metadata, fixed style.
"""

from __future__ import annotations

import logging
import os
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import BoundaryNorm, ListedColormap  # noqa: E402

from .leakage import BUCKET_EDGES  # noqa: E402
from .sweep import SweepResult  # noqa: E402

log = logging.getLogger(__name__)

STYLE = {
    "svg.hashsalt": "fluxlat",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "figure.figsize": (4.8, 3.2),
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
}

LOG_PREFIXES = ("d_", "eps_", "rate_")
BUCKET_LABELS = ("< 1e-5", "1e-5 to 1e-4", "1e-4 to 1e-3", ">= 1e-3")
BUCKET_COLORS = ("#f2f2f2", "#c6dbef", "#6baed6", "#08519c")


def is_log_metric(name: str) -> bool:
    return name.startswith(LOG_PREFIXES)


def _label(name: str) -> str:
    for suffix, unit in (("_ghz", " (GHz)"), ("_ns", " (ns)"), ("_rad", " (rad)")):
        if name.endswith(suffix):
            return name[: -len(suffix)] + unit
    return name


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _line_plot(result: SweepResult, metric: str, path: str):
    names = list(result.axes)
    x = result.axes[names[0]]
    y = result.values[metric]
    fig, ax = plt.subplots()
    if y.ndim == 1:
        ax.plot(x, np.abs(y) if is_log_metric(metric) else y, "o-")
    else:
        series = result.axes[names[1]]
        for j, s in enumerate(series):
            col = y[:, j]
            ax.plot(x, np.abs(col) if is_log_metric(metric) else col, "o-", label=f"{names[1]} = {s:g}")
        ax.legend(frameon=False)
    if is_log_metric(metric):
        positive = y[np.isfinite(y) & (y > 0)]
        if positive.size:
            ax.set_yscale("log")
    ax.set_xlabel(_label(names[0]))
    ax.set_ylabel(_label(metric))
    fig.tight_layout()
    _save(fig, path)


def _leakage_plot(result: SweepResult, source: str, path: str):
    ks = result.axes["k"]
    deltas = result.axes["delta_ghz"]
    buckets = result.values[f"bucket_{source}"]
    rates = result.values[f"rate_{source}"]
    cmap = ListedColormap(BUCKET_COLORS)
    norm = BoundaryNorm(np.arange(-0.5, 4.5), cmap.N)
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(deltas, ks, buckets, cmap=cmap, norm=norm, shading="nearest")
    positive = np.where(np.isfinite(rates) & (rates > 0), rates, np.nan)
    if np.any(np.isfinite(positive)) and len(ks) > 1 and len(deltas) > 1:
        ax.contour(deltas, ks, np.log10(positive), levels=np.log10(BUCKET_EDGES), colors="k", linewidths=0.6)
    if len(ks) > 1 and np.all(ks > 0):
        ax.set_yscale("log")
    cbar = fig.colorbar(mesh, ax=ax, ticks=range(4))
    cbar.ax.set_yticklabels(BUCKET_LABELS)
    ax.set_xlabel(_label("delta_ghz"))
    ax.set_ylabel("k")
    ax.set_title(f"source |{source}>")
    fig.tight_layout()
    _save(fig, path)


def emit_plots(result: SweepResult, prefix: str) -> List[str]:
    """Write one SVG per metric (one per source for leakage maps); return the paths."""
    written = []
    with plt.rc_context(STYLE):
        if "k" in result.axes and "delta_ghz" in result.axes:
            sources = [k[len("rate_"):] for k in result.values if k.startswith("rate_")]
            for src in sources:
                if result.values[f"rate_{src}"].size == 0:
                    log.warning("no values for source %s; no plot written", src)
                    continue
                path = f"{prefix}_leakage_{src}.svg"
                _leakage_plot(result, src, path)
                written.append(path)
            return written
        for metric, values in result.values.items():
            if values.size == 0 or not np.any(np.isfinite(values)):
                log.warning("metric %s has no finite values; no plot written", metric)
                continue
            path = f"{prefix}_{metric}.svg"
            _line_plot(result, metric, path)
            written.append(path)
    return written


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
