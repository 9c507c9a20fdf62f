"""Per-link channel metrics from rotating-receiver records.

Powers are averaged in linear milliwatts and reported in dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import angular_deviation, zenith_angle
from .ingest import AntennaPattern, PowerAngularRecord, SidewalkDataset

K_CAP_DB = 60.0
EMPTY_FLOOR_MW = 1e-30


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(mw, dtype=float))


@dataclass(frozen=True, eq=False)
class PowerAngularSpectrum:
    """Time-averaged power per azimuth bin over [0, 360).

    ``filled`` marks bins that had no samples and were interpolated.
    """

    bins: np.ndarray
    bin_width: float = 1.0
    distance: float = 1.0
    link_id: str = ""
    filled: np.ndarray | None = None

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=float)
        if abs(len(b) * self.bin_width - 360.0) > 1e-9:
            raise ValueError("bins x bin_width must equal 360 degrees")
        if np.any(~(b > 0)):
            raise ValueError("PAS bin powers must be positive")
        if not self.distance > 0:
            raise ValueError("distance must be positive")
        filled = np.zeros(len(b), bool) if self.filled is None else np.asarray(self.filled, bool)
        b.setflags(write=False)
        filled.setflags(write=False)
        object.__setattr__(self, "bins", b)
        object.__setattr__(self, "filled", filled)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(len(self.bins)) + 0.5) * self.bin_width

    @property
    def bins_dbm(self) -> np.ndarray:
        return mw_to_dbm(self.bins)

    def rotated(self, shift: int) -> "PowerAngularSpectrum":
        return PowerAngularSpectrum(np.roll(self.bins, shift), self.bin_width, self.distance,
                                    self.link_id, np.roll(self.filled, shift))


@dataclass(frozen=True)
class LinkMetrics:
    link_id: str
    distance: float
    path_gain: float
    azimuth_gain: float
    aoa: float
    k_factor: float | None = None


def _fill_circular(values, empty):
    """Linear (in mW) circular interpolation across empty bins."""
    n = len(values)
    idx = np.flatnonzero(~empty)
    # unroll one period on each side so np.interp wraps around
    xp = np.concatenate([idx - n, idx, idx + n])
    fp = np.tile(values[idx], 3)
    out = values.copy()
    holes = np.flatnonzero(empty)
    out[holes] = np.interp(holes, xp, fp)
    return out


def average_pas(rec: PowerAngularRecord, bin_width: float = 1.0,
                interpolate: bool = True) -> PowerAngularSpectrum:
    nbins = int(round(360.0 / bin_width))
    if abs(nbins * bin_width - 360.0) > 1e-9:
        raise ValueError("bin_width must divide 360")
    if len(rec.samples) == 0:
        raise ValueError("record has no samples")
    idx = np.floor(rec.azimuth / bin_width).astype(int) % nbins
    if np.all(idx == idx[0]):
        raise ValueError("no rotation detected: all samples fall in one bin")
    sums = np.bincount(idx, weights=dbm_to_mw(rec.power_dbm), minlength=nbins)
    counts = np.bincount(idx, minlength=nbins)
    empty = counts == 0
    means = np.where(empty, 0.0, sums / np.maximum(counts, 1))
    if empty.any():
        if interpolate:
            means = _fill_circular(means, empty)
        else:
            means[empty] = EMPTY_FLOOR_MW
    means = np.maximum(means, EMPTY_FLOOR_MW)
    return PowerAngularSpectrum(means, bin_width, rec.distance, rec.link_id, empty)


def path_gain(pas: PowerAngularSpectrum, tx_power: float, elev_correction: float = 0.0) -> float:
    """Azimuth-averaged received power over transmit power and elevation gain, dB."""
    mean_mw = math.fsum(pas.bins.tolist()) / len(pas.bins)
    return 10.0 * math.log10(mean_mw) - tx_power - elev_correction


def elevation_correction(pattern: AntennaPattern, zenith: float) -> float:
    return float(pattern.elevation_gain(zenith))


def azimuth_gain(pas: PowerAngularSpectrum) -> float:
    # normalising by the peak first keeps a flat PAS at exactly 0 dB
    rel = pas.bins / pas.bins.max()
    return 10.0 * math.log10(max(len(rel) / math.fsum(rel.tolist()), 1.0))


def aoa(pas: PowerAngularSpectrum) -> float:
    # np.argmax returns the first maximum, i.e. the smallest angle
    return float(pas.centers[int(np.argmax(pas.bins))])


def k_factor_from_power(power_mw, cap_db: float = K_CAP_DB) -> float:
    """Moment-based Rician K (dB) from a series of linear power samples."""
    p = np.asarray(power_mw, dtype=float)
    if len(p) < 2:
        raise ValueError("need at least two power samples")
    mean = float(np.mean(p))
    var = float(np.var(p, ddof=1))
    v = math.sqrt(max(mean * mean - var, 0.0))
    if v <= 0.0:
        return -cap_db
    if mean - v <= mean * 1e-15:
        return cap_db
    return float(np.clip(10.0 * math.log10(v / (mean - v)), -cap_db, cap_db))


def scan_index(azimuth) -> np.ndarray:
    """Rotation number of each sample, counting wraps through north."""
    az = np.asarray(azimuth, dtype=float)
    wraps = np.concatenate([[0], (np.diff(az) < 0).astype(int)])
    return np.cumsum(wraps)


def k_factor_moments(rec: PowerAngularRecord, aoa_deg: float, window: float = 10.0) -> float:
    """Temporal K-factor (dB) of the per-scan power inside a window around the AoA."""
    if rec.scan_count < 2:
        raise ValueError("K-factor needs at least 2 scans")
    scans = scan_index(rec.azimuth)
    dev = np.abs((rec.azimuth - aoa_deg + 180.0) % 360.0 - 180.0)
    sel = dev <= window / 2.0
    if not sel.any():
        raise ValueError("no samples inside the AoA window")
    p = dbm_to_mw(rec.power_dbm[sel])
    s = scans[sel]
    ids, inv = np.unique(s, return_inverse=True)
    if len(ids) < 2:
        raise ValueError("K-factor needs at least 2 scans inside the window")
    per_scan = np.bincount(inv, weights=p) / np.bincount(inv)
    return k_factor_from_power(per_scan)


def link_metrics(rec: PowerAngularRecord, tx_power: float,
                 pattern: AntennaPattern | None = None, bin_width: float = 1.0,
                 window: float = 10.0) -> LinkMetrics:
    pas = average_pas(rec, bin_width)
    corr = 0.0
    if pattern is not None:
        corr = elevation_correction(pattern, zenith_angle(rec.tx_pos, rec.rx_pos))
    a = aoa(pas)
    try:
        k = k_factor_moments(rec, a, window)
    except ValueError:
        k = None
    return LinkMetrics(rec.link_id, pas.distance, path_gain(pas, tx_power, corr),
                       azimuth_gain(pas), a, k)


def dataset_metrics(ds: SidewalkDataset, pattern: AntennaPattern | None = None,
                    bin_width: float = 1.0, window: float = 10.0) -> list:
    return [link_metrics(r, ds.tx_power, pattern, bin_width, window) for r in ds.records]


def aoa_deviations(metrics, aois) -> np.ndarray:
    return np.array([angular_deviation(m.aoa, a) for m, a in zip(metrics, aois)])


@dataclass(frozen=True)
class StackGrid:
    distances: np.ndarray
    centers: np.ndarray
    power_dbm: np.ndarray

    def to_text(self, fmt: str = "{:.6g}") -> str:
        lines = ["distance_m," + ",".join(fmt.format(c) for c in self.centers)]
        for d, row in zip(self.distances, self.power_dbm):
            lines.append(fmt.format(d) + "," + ",".join(fmt.format(v) for v in row))
        return "\n".join(lines) + "\n"


def spectrum_stack_grid(ds: SidewalkDataset, bin_width: float = 1.0) -> StackGrid:
    if len(ds.records) == 0:
        raise ValueError("empty dataset")
    pas = [average_pas(r, bin_width) for r in ds.records]
    order = np.argsort([p.distance for p in pas], kind="stable")
    pas = [pas[i] for i in order]
    return StackGrid(np.array([p.distance for p in pas]), pas[0].centers,
                     np.vstack([p.bins_dbm for p in pas]))


class EmpiricalCDF:
    """Empirical CDF with a lower-rule quantile."""

    def __init__(self, values):
        v = np.sort(np.asarray(values, dtype=float))
        if len(v) == 0:
            raise ValueError("empty sample")
        self.values = v

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / len(self.values)

    def quantile(self, q):
        return float(np.quantile(self.values, q, method="lower"))

    @property
    def median(self):
        return self.quantile(0.5)

    def steps(self):
        n = len(self.values)
        return self.values, np.arange(1, n + 1) / n


def abg_cdf(values) -> EmpiricalCDF:
    return EmpiricalCDF(values)
