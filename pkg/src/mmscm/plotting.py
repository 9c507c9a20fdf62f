"""Static figures for the CLI report paths.

Everything renders through the Agg canvas on standalone Figure objects, so
no pyplot state leaks between calls and no display is needed. PNG metadata
is stripped so reruns give the same bytes on one matplotlib install.
"""

from __future__ import annotations

import matplotlib
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
import numpy as np

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.dpi": 150,
    "svg.hashsalt": "mmscm",
}
FIGSIZE = (5.0, 3.4)


def _new(figsize=FIGSIZE):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=figsize)
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def save(fig, path):
    """Write ``fig`` to ``path``; format comes from the suffix."""
    with matplotlib.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    return path


def plot_abg_cdf(groups, path):
    """``groups`` maps label -> ABG values (dBi)."""
    fig, ax = _new()
    for label, vals in groups.items():
        v = np.sort(np.asarray(vals, dtype=float))
        ax.step(v, np.arange(1, len(v) + 1) / len(v), where="post", label=label)
    ax.set_xlabel("azimuth beamforming gain (dBi)")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.legend(loc="upper left")
    return save(fig, path)


def plot_fits(series, path):
    """``series`` is a list of (label, points (N,2), fit or None)."""
    fig, ax = _new()
    for label, pts, fit in series:
        pts = np.asarray(pts, dtype=float)
        line = ax.semilogx(pts[:, 0], pts[:, 1], "o", alpha=0.5, label=label)[0]
        if fit is not None:
            d = np.geomspace(fit.d_min, fit.d_max, 100)
            ax.semilogx(d, fit(d), "-", color=line.get_color())
    ax.set_xlabel("link distance (m)")
    ax.set_ylabel("path gain (dB)")
    ax.legend(loc="lower left")
    return save(fig, path)


def plot_comparison(distances, curves, path):
    """``curves`` maps label -> path gain (dB) on ``distances``."""
    fig, ax = _new()
    for label, pg in curves.items():
        ax.semilogx(distances, pg, label=label)
    ax.set_xlabel("link distance (m)")
    ax.set_ylabel("path gain (dB)")
    ax.legend(loc="lower left")
    return save(fig, path)


def plot_snr(profiles, threshold, path):
    fig, ax = _new()
    for prof in profiles:
        ax.plot(prof.distances, prof.snr, label=prof.label or None)
    ax.axhline(threshold, color="k", ls="--", lw=0.8)
    ax.set_xlabel("link distance (m)")
    ax.set_ylabel("median SNR (dB)")
    if any(p.label for p in profiles):
        ax.legend(loc="upper right")
    return save(fig, path)


def plot_histogram(hist, n_links, path):
    fig, ax = _new()
    ks = sorted(hist)
    total = sum(hist.values())
    ax.bar(ks, [hist[k] / total for k in ks], width=0.6)
    ax.set_xticks(ks)
    ax.set_xlabel("channels needed")
    ax.set_ylabel("fraction of trials")
    ax.set_title(f"{n_links} links")
    return save(fig, path)


def plot_stack(grid, path):
    fig, ax = _new((5.0, 4.0))
    im = ax.pcolormesh(grid.centers, grid.distances, grid.power_dbm, shading="nearest",
                       cmap="viridis")
    fig.colorbar(im, ax=ax, label="power (dBm)")
    ax.set_xlabel("azimuth (deg)")
    ax.set_ylabel("link distance (m)")
    ax.grid(False)
    return save(fig, path)
