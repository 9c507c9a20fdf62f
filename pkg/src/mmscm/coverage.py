"""Link-budget SNR profiles, cutoff distances and Shannon rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .pathloss import PathGainFit, eval_fit

THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class LinkBudget:
    tx_power: float = 28.0
    tx_max_gain: float = 23.0
    rx_gain: float = 11.0
    noise_figure: float = 10.0
    bandwidth: float = 800e6
    snr_cutoff: float = 15.0
    median_abg: float = 14.5
    nominal_azimuth_gain: float = 14.5

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.median_abg > self.nominal_azimuth_gain:
            raise ValueError("median ABG above the nominal azimuth gain")

    def without_degradation(self) -> "LinkBudget":
        return replace(self, median_abg=self.nominal_azimuth_gain)


def noise_floor(budget: LinkBudget) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(budget.bandwidth) + budget.noise_figure


def effective_tx_gain(budget: LinkBudget) -> float:
    """Max Tx gain minus the azimuth beamforming gain degradation."""
    return budget.tx_max_gain - (budget.nominal_azimuth_gain - budget.median_abg)


@dataclass(frozen=True)
class SnrProfile:
    distances: np.ndarray
    snr: np.ndarray
    label: str = ""


def snr_profile(fit: PathGainFit, budget: LinkBudget, step: float = 1.0,
                d_start: float | None = None, d_end: float | None = None) -> SnrProfile:
    """Median SNR on a regular distance grid from the fitted path gain.

    The grid runs from ``d_start`` (default: ceil of the fit's d_min) to
    ``d_end`` (default: the fit's d_max) in ``step`` meters.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    lo = math.ceil(fit.d_min) if d_start is None else d_start
    hi = fit.d_max if d_end is None else d_end
    if hi < lo:
        raise ValueError("empty distance range")
    d = lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)
    const = budget.tx_power + effective_tx_gain(budget) + budget.rx_gain - noise_floor(budget)
    return SnrProfile(d, const + eval_fit(fit, d), fit.label)


def cutoff_distance(profile: SnrProfile, threshold: float = 15.0) -> float | None:
    """Largest grid distance whose SNR is at least ``threshold``.

    None means the SNR never drops below the threshold on the grid (no
    cutoff within the sidewalk); nan means it never reaches it.
    """
    if not np.any(profile.snr < threshold):
        return None
    ok = np.flatnonzero(profile.snr >= threshold)
    if len(ok) == 0:
        return math.nan
    return float(profile.distances[ok[-1]])


def shannon_rate(snr_db, bandwidth: float):
    return bandwidth * np.log2(1.0 + np.power(10.0, np.asarray(snr_db, dtype=float) / 10.0))


@dataclass(frozen=True)
class CoverageSummary:
    label: str
    snr_min: float
    snr_max: float
    cutoff: float | None
    cutoff_no_degradation: float | None
    effective_tx_gain: float


def summarize(fit: PathGainFit, budget: LinkBudget, step: float = 1.0, **grid) -> CoverageSummary:
    """Summary under the degraded-gain convention, with the undegraded cutoff alongside."""
    prof = snr_profile(fit, budget, step, **grid)
    prof0 = snr_profile(fit, budget.without_degradation(), step, **grid)
    return CoverageSummary(fit.label, float(prof.snr.min()), float(prof.snr.max()),
                           cutoff_distance(prof, budget.snr_cutoff),
                           cutoff_distance(prof0, budget.snr_cutoff),
                           effective_tx_gain(budget))
