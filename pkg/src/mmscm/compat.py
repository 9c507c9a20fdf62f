"""Compatibility between transmitter and receiver SCMs.

Received and allowed levels are PSDs in dBm/MHz. A model's reference power
is the total power inside its mask's 0 dB plateau, so the per-MHz level is
``reference_power - 10 log10(plateau_MHz)``; masks without a plateau are
taken as already per-MHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import bearing, link_distance_3d
from .pathloss import fspl
from .scm import PowerMap, PropagationMap, SpectrumConsumptionModel


@dataclass(frozen=True)
class CompatReport:
    margin: float
    per_interferer: tuple
    worst_freq: float | None
    compatible: bool

    def __post_init__(self):
        if self.compatible != (self.margin >= 0):
            raise ValueError("compatible must equal margin >= 0")


def directional_gain(pmap: PowerMap, bearing_deg, elevation=0.0):
    return pmap.gain(bearing_deg, elevation)


def path_loss_between(prop: PropagationMap, bearing_deg, d, f):
    """Path loss (positive dB): free space to 1 m, then the sector exponent."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("path_loss_between needs d >= 1 m")
    out = -fspl(1.0, f) + 10.0 * prop.exponent_at(bearing_deg) * np.log10(d)
    return out if np.ndim(out) else float(out)


def psd_offset_db(model: SpectrumConsumptionModel) -> float:
    w = model.mask.plateau_width
    return 10.0 * math.log10(w / 1e6) if w > 0 else 0.0


def received_psd(tx: SpectrumConsumptionModel, rx: SpectrumConsumptionModel, f) -> float:
    """Interference PSD (dBm/MHz) from ``tx`` at ``rx`` at frequency ``f``."""
    d = link_distance_3d(tx.position, rx.position)
    if d < 1e-9:
        raise ValueError("coincident tx and rx locations")
    b_tx = bearing(tx.position, rx.position)
    b_rx = bearing(rx.position, tx.position)
    emit = tx.spectrum_mask(f)
    if emit == -math.inf:
        return -math.inf
    # inside 1 m the free-space anchor is held constant
    return (tx.reference_power - psd_offset_db(tx) + emit
            + tx.power_map.gain(b_tx) - path_loss_between(tx.propagation_map, b_tx, max(d, 1.0), f)
            + rx.power_map.gain(b_rx))


def allowed_psd(rx: SpectrumConsumptionModel, f) -> float:
    return rx.reference_power - psd_offset_db(rx) + rx.underlay_mask(f)


def frequency_grid(txs, rx) -> np.ndarray:
    """Union of all mask breakpoints plus midpoints of neighbouring points."""
    pts = np.unique(np.concatenate([rx.underlay_mask.freqs]
                                   + [t.spectrum_mask.freqs for t in txs]))
    mids = 0.5 * (pts[:-1] + pts[1:])
    return np.unique(np.concatenate([pts, mids]))


def aggregate_margin(txs, rx: SpectrumConsumptionModel, freqs=None) -> CompatReport:
    txs = list(txs)
    if freqs is None:
        freqs = frequency_grid(txs, rx)
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        raise ValueError("empty frequency grid")
    if not txs:
        return CompatReport(math.inf, (), None, True)

    rpos = rx.position.as_array()
    for t in txs:
        if np.hypot(*(t.position.as_array() - rpos)[:2]) < 1e-9:
            raise ValueError("coincident tx and rx locations")
    levels = coupling_matrix(txs, [rx])[0][:, None] + emission_spectrum(txs, freqs)
    with np.errstate(divide="ignore"):
        agg = 10.0 * np.log10(np.sum(np.power(10.0, levels / 10.0), axis=0))
    allowed = np.array([allowed_psd(rx, f) for f in freqs])
    margin = np.full(len(freqs), math.inf)
    hit = agg > -math.inf
    with np.errstate(invalid="ignore"):
        margin[hit] = allowed[hit] - agg[hit]
    margin[hit & (allowed == -math.inf)] = -math.inf
    k = int(np.argmin(margin))
    per = tuple((t.model_id, float(levels[i].max())) for i, t in enumerate(txs))
    m = float(margin[k])
    worst = None if m == math.inf else float(freqs[k])
    return CompatReport(m, per, worst, m >= 0)


def _grouped(models, attr, key):
    groups = {}
    for j, m in enumerate(models):
        obj = getattr(m, attr)
        groups.setdefault((id(getattr(obj, key)), obj.resolution), (obj, []))[1].append(j)
    return [(obj, np.array(idx)) for obj, idx in groups.values()]


def coupling_matrix(txs, rxs) -> np.ndarray:
    """Frequency-independent part of ``received_psd_matrix``.

    ``out[i, j]`` holds Tx j's per-MHz reference level plus both antenna
    gains minus the distance term of its propagation map, as seen at Rx i.
    Adding ``fspl(1, f)`` and the Tx mask at ``f`` gives the received PSD.
    Pairs at coincident horizontal positions come back as -inf. Models that
    share a power-map or propagation grid are evaluated together.
    """
    txs, rxs = list(txs), list(rxs)
    tpos = np.array([t.position.as_array() for t in txs]).reshape(-1, 3)
    rpos = np.array([r.position.as_array() for r in rxs]).reshape(-1, 3)
    diff = tpos[None, :, :] - rpos[:, None, :]
    d = np.maximum(np.linalg.norm(diff, axis=2), 1.0)
    ok = np.hypot(diff[..., 0], diff[..., 1]) > 1e-9
    b_rx = np.degrees(np.arctan2(diff[..., 0], diff[..., 1])) % 360.0
    b_tx = (b_rx + 180.0) % 360.0

    base = np.array([t.reference_power - psd_offset_db(t) for t in txs])
    out = np.broadcast_to(base, d.shape).copy()
    for prop, cols in _grouped(txs, "propagation_map", "exponent"):
        out[:, cols] -= 10.0 * prop.exponent_at(b_tx[:, cols]) * np.log10(d[:, cols])
    for pm, cols in _grouped(txs, "power_map", "gain_db"):
        bore = np.array([txs[j].power_map.boresight_az for j in cols])
        out[:, cols] += pm.gain_relative(b_tx[:, cols] - bore[None, :])
    for pm, rows in _grouped(rxs, "power_map", "gain_db"):
        bore = np.array([rxs[i].power_map.boresight_az for i in rows])
        out[rows, :] += pm.gain_relative(b_rx[rows, :] - bore[:, None])
    out[~ok] = -math.inf
    return out


def emission_spectrum(txs, freqs) -> np.ndarray:
    """``out[j, k]`` = Tx j's mask plus the 1 m free-space anchor at ``freqs[k]``."""
    freqs = np.asarray(freqs, dtype=float)
    masks = np.array([t.spectrum_mask(freqs) for t in txs]).reshape(len(txs), freqs.size)
    return masks + fspl(1.0, freqs)[None, :]


def received_psd_matrix(txs, rxs, f) -> np.ndarray:
    """``out[i, j]`` = PSD from ``txs[j]`` at ``rxs[i]``; vectorized received_psd."""
    txs = list(txs)
    return coupling_matrix(txs, rxs) + emission_spectrum(txs, [f])[:, 0][None, :]
