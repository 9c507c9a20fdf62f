"""Single-slope path gain fits and reference propagation models.

Gains are negative dB (path gain = -path loss). Fits are referenced to
d = 1 m: ``pg(d) = b + 10 n log10(d)``.

3GPP reference: TR 38.901 V17.0.0 (2022-03), Table 7.4.1-1 (UMi street
canyon) and Table 7.4.2-1 (UMi LOS probability).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
TR38901_VERSION = "3GPP TR 38.901 V17.0.0"


@dataclass(frozen=True)
class PathGainFit:
    slope_n: float
    intercept_b: float
    rms_sigma: float
    d_min: float
    d_max: float
    count: int
    label: str = ""

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("a fit needs at least two points")
        if self.rms_sigma < 0:
            raise ValueError("rms_sigma must be nonnegative")
        if not self.d_min < self.d_max:
            raise ValueError("d_min must be below d_max")

    def __call__(self, d):
        return eval_fit(self, d)


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (distance, path_gain) pairs")
    if np.any(pts[:, 0] <= 0):
        raise ValueError("distances must be positive")
    return pts


def fit_single_slope(points, label: str = "") -> PathGainFit:
    """Ordinary least squares of path gain (dB) against 10 log10(d)."""
    pts = _as_points(points)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    x = 10.0 * np.log10(pts[:, 0])
    y = pts[:, 1]
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-12 * max(1.0, float(x @ x)):
        raise ValueError("singular design: all distances are equal")
    n = float(xc @ (y - y.mean())) / sxx
    b = float(y.mean() - n * x.mean())
    resid = y - (b + n * x)
    sigma = math.sqrt(float(resid @ resid) / len(y))
    return PathGainFit(n, b, sigma, float(pts[:, 0].min()), float(pts[:, 0].max()),
                       len(pts), label)


def eval_fit(fit: PathGainFit, d):
    return fit.intercept_b + 10.0 * fit.slope_n * np.log10(d)


def residuals(fit: PathGainFit, points) -> np.ndarray:
    pts = _as_points(points)
    return pts[:, 1] - eval_fit(fit, pts[:, 0])


def fspl(d, f):
    """Free-space path gain (negative dB) at distance ``d`` m and ``f`` Hz."""
    d, f = np.asarray(d, dtype=float), np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    return -(20.0 * np.log10(d) + 20.0 * np.log10(f)
             + 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT))


def _umi_check(d2d, h_bs, h_ut):
    if not 1.5 <= h_ut <= 22.5:
        raise ValueError(f"h_ut={h_ut} m outside UMi range [1.5, 22.5]")
    if not 1.0 < h_bs <= 150.0:
        raise ValueError(f"h_bs={h_bs} m outside supported range (1, 150]")
    d2d = np.asarray(d2d, dtype=float)
    if np.any(d2d < 10.0) or np.any(d2d > 5000.0):
        raise ValueError("UMi formulas valid for 10 m <= d2D <= 5000 m")
    return d2d


def _d2d_from_3d(d3d, h_bs, h_ut):
    d3d = np.asarray(d3d, dtype=float)
    dh2 = (h_bs - h_ut) ** 2
    if np.any(d3d ** 2 < dh2):
        raise ValueError("3D distance shorter than the height difference")
    return np.sqrt(d3d ** 2 - dh2)


def umi_breakpoint(h_bs, h_ut, f):
    # effective heights use a 1 m environment height
    return 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * f / SPEED_OF_LIGHT


def _umi_los_loss(d3d, d2d, h_bs, h_ut, f):
    fc = f / 1e9
    dbp = umi_breakpoint(h_bs, h_ut, f)
    pl1 = 32.4 + 21.0 * np.log10(d3d) + 20.0 * math.log10(fc)
    pl2 = (32.4 + 40.0 * np.log10(d3d) + 20.0 * math.log10(fc)
           - 9.5 * np.log10(dbp ** 2 + (h_bs - h_ut) ** 2))
    return np.where(d2d <= dbp, pl1, pl2)


def umi_los(d3d, h_bs=10.0, h_ut=1.5, f=28e9):
    """UMi street-canyon LOS path gain (negative dB)."""
    d3d = np.asarray(d3d, dtype=float)
    d2d = _umi_check(_d2d_from_3d(d3d, h_bs, h_ut), h_bs, h_ut)
    return -_umi_los_loss(d3d, d2d, h_bs, h_ut, f)


def umi_nlos(d3d, h_bs=10.0, h_ut=1.5, f=28e9):
    """UMi street-canyon NLOS path gain: the larger of LOS and NLOS' losses."""
    d3d = np.asarray(d3d, dtype=float)
    d2d = _umi_check(_d2d_from_3d(d3d, h_bs, h_ut), h_bs, h_ut)
    fc = f / 1e9
    pl_los = _umi_los_loss(d3d, d2d, h_bs, h_ut, f)
    pl_nlos = 35.3 * np.log10(d3d) + 22.4 + 21.3 * math.log10(fc) - 0.3 * (h_ut - 1.5)
    return -np.maximum(pl_los, pl_nlos)


def los_probability(d2d):
    d2d = np.asarray(d2d, dtype=float)
    if np.any(d2d < 0):
        raise ValueError("d2d must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        p = 18.0 / d2d + np.exp(-d2d / 36.0) * (1.0 - 18.0 / d2d)
    return np.where(d2d <= 18.0, 1.0, p)


@dataclass(frozen=True)
class FitComparison:
    distances: np.ndarray
    delta: np.ndarray
    delta_n: float
    delta_b: float


def compare_fits(a: PathGainFit, b: PathGainFit, distances) -> FitComparison:
    d = np.asarray(distances, dtype=float)
    return FitComparison(d, eval_fit(a, d) - eval_fit(b, d),
                         a.slope_n - b.slope_n, a.intercept_b - b.intercept_b)


def group_fit(datasets, selector=None, label: str = "") -> PathGainFit:
    """Pooled OLS over the (d, pg) points of every selected dataset.

    ``datasets`` holds ``(dataset, points)`` pairs; ``selector`` is a
    predicate over the dataset (default: select all).
    """
    pools = [np.asarray(pts, dtype=float).reshape(-1, 2)
             for ds, pts in datasets if selector is None or selector(ds)]
    if not pools:
        raise ValueError("selector matched no datasets")
    return fit_single_slope(np.vstack(pools), label)
