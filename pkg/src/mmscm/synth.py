"""Synthetic measurement data and the default horn pattern.

The raw measurements behind the published sidewalk summaries are not
available, so datasets are regenerated from each row's slope, intercept
and RMS spread plus lognormal shadowing. Records mimic the rotating
receiver: 2 rev/s, 40 scans, 400 samples per scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import bearing, zenith_angle
from .ingest import AntennaPattern, Position3D, PowerAngularRecord, SidewalkDataset
from .metrics import elevation_correction

HORN_AZ_HPBW = 10.0
HORN_EL_HPBW = 16.0
HORN_PEAK_DBI = 24.0


@dataclass(frozen=True)
class SidewalkRow:
    name: str
    length: float
    links: int
    slope_n: float
    intercept_b: float
    rms_sigma: float
    median_abg: float
    p10_abg: float
    cw_angle: float
    visual_los: str = "VLOS"
    condition: str = "standard"


# (name, length m, links, n, b dB, sigma dB, median ABG, 10th-pct ABG, CW angle)
_ROWS = [
    ("Int-N-E", 507, 101, -3.5, -36.8, 4.3, 14.1, 12.3, 120, "VLOS"),
    ("Int-W-N", 256, 79, -2.6, -52.2, 4.4, 14.2, 13.2, 120, "VLOS"),
    ("Int-S-E", 317, 93, -3.4, -35.5, 4.6, 14.2, 13.4, 120, "VLOS"),
    ("Int-E-N", 146, 85, -2.3, -60.3, 4.5, 14.2, 13.1, 120, "VLOS"),
    ("Int-E-S", 146, 88, -2.8, -49.5, 3.2, 14.1, 12.4, 120, "VLOS"),
    ("Int-N-W", 509, 139, -3.6, -36.0, 3.6, 13.1, 11.8, 120, "VNLOS"),
    ("Int-W-S", 256, 69, -3.1, -47.5, 3.1, 11.6, 10.4, 120, "VNLOS"),
    ("Int-S-W", 317, 100, -3.6, -39.2, 3.4, 12.9, 11.2, 120, "VNLOS"),
    ("Bri-N-E", 219, 65, -2.3, -60.0, 3.9, 12.6, 11.3, 30, "VLOS"),
    ("Bri-N-W", 219, 70, -2.6, -52.5, 4.3, 13.4, 11.7, 30, "VLOS"),
    ("Bri-S-E", 280, 84, -2.5, -55.7, 5.5, 12.8, 11.6, 210, "VLOS"),
    ("Bri-S-W", 280, 87, -2.2, -59.8, 4.0, 13.2, 11.4, 210, "VLOS"),
    ("Bal-N-E", 488, 156, -3.4, -47.2, 5.8, 13.9, 12.8, 208, "VLOS"),
    ("Bal-N-W", 464, 136, -2.9, -66.9, 4.2, 12.6, 10.0, 208, "VLOS"),
    ("Bal-E-N", 842, 129, -1.5, -94.1, 6.5, 14.1, 12.1, 120, "VLOS"),
    ("Roof-B-N", 98, 33, 0.34, -110.2, 3.4, 10.5, 7.9, 300, "VLOS"),
    ("Roof-B-S", 98, 33, 4.94, -190.0, 3.6, 10.9, 8.8, 300, "VLOS"),
    ("Roof-S-W", 1058, 150, -1.06, -101.8, 5.7, 13.7, 12.1, 300, "VLOS"),
    ("Roof-S-E", 1040, 137, -0.22, -119.7, 5.8, 13.8, 12.8, 300, "VLOS"),
    ("Roof-S2-E", 1102, 171, -1.21, -104.4, 7.8, 13.6, 11.6, 30, "VLOS"),
    ("Roof-S2-W", 1209, 118, -3.11, -45.8, 4.4, 14.2, 13.2, 30, "VLOS"),
    ("Roof-SE-N", 573, 114, -2.41, -61.1, 5.5, 14.0, 12.7, 120, "VLOS"),
    ("Roof-E-N", 647, 97, -2.39, -72.2, 3.5, 13.5, 12.3, 120, "VNLOS"),
    ("Roof-E-S", 644, 97, 0.50, -136.5, 5.8, 14.2, 12.6, 120, "VLOS"),
]

_EXTRA_ROWS = [
    ("Int-N-E-NLe", 507, 125, -2.95, -42.9, 3.8, 14.1, 12.4, 120, "VLOS", "no_leaves"),
    ("Int-N-E-10ft", 507, 79, -3.86, -27.0, 3.7, 13.9, 11.0, 120, "VLOS", "tx_raised"),
    ("Int-W-N-NLe", 256, 77, -1.92, -63.9, 3.7, 14.1, 12.5, 120, "VLOS", "no_leaves"),
    ("Int-W-N-Swap", 256, 79, -2.72, -48.7, 3.2, 12.9, 10.6, 210, "VLOS", "swap"),
    ("Int-W-N-St", 256, 68, -2.33, -56.4, 3.6, 13.7, 9.9, 120, "VLOS", "street"),
    ("Int-W-N2", 259, 81, -5.58, -22.1, 6.3, 12.9, 9.8, 120, "VLOS", "adjacent"),
    ("Int-W-S-Swap", 256, 79, -2.93, -52.8, 2.9, 10.4, 8.2, 210, "VNLOS", "swap"),
    ("Int-W-S-Wall", 198, 53, -3.32, -40.7, 3.5, 11.9, 9.4, 120, "VNLOS", "wall"),
]

SIDEWALKS = {r[0]: SidewalkRow(*r) for r in _ROWS}
SIDEWALKS.update({r[0]: SidewalkRow(*r) for r in _EXTRA_ROWS})

SITE_HEIGHTS = {"Int": 15.0, "Bri": 6.0, "Bal": 15.0, "Roof": 60.0}


def horn_pattern(az_hpbw=HORN_AZ_HPBW, el_hpbw=HORN_EL_HPBW, sidelobe_db=-15.0,
                 back_db=-25.0, peak_gain=HORN_PEAK_DBI, step=0.5) -> AntennaPattern:
    """Parametric horn: parabolic main lobe, sidelobe envelope falling to the back lobe.

    Relative gain is ``-min(12 (t / hpbw)^2, A(t))`` where the envelope
    ``A`` runs linearly from ``-sidelobe_db`` where the main lobe meets it
    out to ``-back_db`` at 180 degrees.
    """
    ang = np.arange(-180.0, 180.0 + step / 2, step)

    def cut(hpbw):
        a = np.abs(ang)
        t1 = hpbw * math.sqrt(-sidelobe_db / 12.0)
        frac = np.clip((a - t1) / (180.0 - t1), 0.0, 1.0)
        env = -sidelobe_db + (sidelobe_db - back_db) * frac
        return np.column_stack([ang, -np.minimum(12.0 * (a / hpbw) ** 2, env)])

    return AntennaPattern(cut(az_hpbw), cut(el_hpbw), peak_gain)


def beam_pas_shape(centers, aoa, width):
    """Relative PAS (linear) of a received beam: horn response plus a diffuse floor."""
    off = (np.asarray(centers) - aoa + 180.0) % 360.0 - 180.0
    return np.power(10.0, -np.minimum(12.0 * (off / width) ** 2, 40.0) / 10.0)


def _shape_for_abg(target_abg, aoa, centers):
    """Beam plus uniform scatter floor mixed to hit a target max/mean ratio (dB)."""
    beam = beam_pas_shape(centers, aoa, HORN_AZ_HPBW)
    beam /= beam.max()
    m = beam.mean()
    ratio = 10.0 ** (target_abg / 10.0)
    # max/mean of beam + c: (1 + c) / (m + c) = ratio
    c = max((1.0 - ratio * m) / (ratio - 1.0), 0.0)
    return beam + c


def synth_record(link_id, tx, rx, pg_db, tx_power=22.0, *, rng, abg_db=14.5, aoa=None,
                 k_db=10.0, scans=40, per_scan=400, rpm=120.0) -> PowerAngularRecord:
    """One rotating-receiver record whose PAS averages to ``pg_db + tx_power``.

    The azimuth pattern has max/mean ``abg_db`` and peaks at ``aoa`` (default:
    bearing to the Tx). Temporal fading at every angle is Rician with K
    ``k_db``, drawn once per scan.
    """
    n = scans * per_scan
    rev_s = 60.0 / rpm
    t = np.arange(n) * (rev_s / per_scan)
    az = (np.arange(n) % per_scan) * (360.0 / per_scan)
    if aoa is None:
        aoa = bearing(rx, tx)
    shape = _shape_for_abg(abg_db, aoa, az)
    k = 10.0 ** (k_db / 10.0)
    h = (math.sqrt(k / (k + 1.0))
         + math.sqrt(1.0 / (k + 1.0)) * (rng.standard_normal(scans)
                                         + 1j * rng.standard_normal(scans)) / math.sqrt(2.0))
    fade = np.repeat(np.abs(h) ** 2, per_scan)
    level_mw = 10.0 ** ((pg_db + tx_power) / 10.0)
    p = level_mw * shape / shape.mean() * fade
    samples = np.column_stack([t, az, 10.0 * np.log10(p)])
    return PowerAngularRecord(link_id, tx, rx, samples, scans)


def sidewalk_geometry(row: SidewalkRow, rx_height: float, d_start: float | None = None):
    """Tx positions along the sidewalk bearing, evenly spaced in 3D distance."""
    d_lo = d_start if d_start is not None else max(rx_height + 5.0, 10.0)
    d_hi = max(row.length, d_lo + 1.0)
    d3 = np.linspace(d_lo, d_hi, row.links)
    horiz = np.sqrt(np.maximum(d3 ** 2 - rx_height ** 2, 0.0))
    th = math.radians(row.cw_angle)
    return [Position3D(h * math.sin(th), h * math.cos(th), 0.0) for h in horiz]


def synth_dataset(name: str, seed=0, *, samples_per_scan=400, scans=40,
                  tx_power=22.0, k_db=10.0, n_links=None,
                  rx_pattern: AntennaPattern | None | str = "horn") -> SidewalkDataset:
    """Dataset regenerated from a published sidewalk row with lognormal shadowing.

    Received levels include the Rx horn's elevation loss toward each Tx
    (``rx_pattern``; ``"horn"`` is the bundled default, None skips it), so
    processing with the same pattern recovers the row's path gain.
    """
    if isinstance(rx_pattern, str):
        if rx_pattern != "horn":
            raise ValueError("rx_pattern must be an AntennaPattern, 'horn' or None")
        rx_pattern = horn_pattern()
    row = SIDEWALKS[name]
    if n_links is not None:
        from dataclasses import replace
        row = replace(row, links=n_links)
    rng = np.random.default_rng(seed)
    h = SITE_HEIGHTS[name.split("-")[0]]
    rx = Position3D(0.0, 0.0, h)
    records = []
    abg_spread = max(row.median_abg - row.p10_abg, 0.1) / 1.2816
    for i, tx in enumerate(sidewalk_geometry(row, h)):
        d = math.dist(tx.as_array(), rx.as_array())
        pg = row.intercept_b + 10.0 * row.slope_n * math.log10(d) + rng.normal(0.0, row.rms_sigma)
        abg = float(np.clip(rng.normal(row.median_abg, abg_spread), 1.0, 20.0))
        if rx_pattern is not None:
            pg += elevation_correction(rx_pattern, zenith_angle(tx, rx))
        records.append(synth_record(f"L{i + 1:03d}", tx, rx, pg, tx_power, rng=rng,
                                    abg_db=abg, k_db=k_db, scans=scans,
                                    per_scan=samples_per_scan))
    return SidewalkDataset(name, tuple(records), condition=row.condition,
                           visual_los=row.visual_los, tx_power=tx_power)


def synth_points(name: str, seed=0, n_points=None, d_range=None, spacing="uniform"):
    """(d, pg) points drawn straight from a row's model, without records.

    ``spacing`` is ``"uniform"`` (uniform in distance) or ``"log"`` (uniform
    in log-distance, the usual design for log-distance fits).
    """
    row = SIDEWALKS[name]
    rng = np.random.default_rng(seed)
    n = row.links if n_points is None else n_points
    lo, hi = d_range if d_range is not None else (10.0, float(row.length))
    if spacing == "uniform":
        d = rng.uniform(lo, hi, n)
    elif spacing == "log":
        d = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), n)
    else:
        raise ValueError("spacing must be 'uniform' or 'log'")
    d = np.sort(d)
    pg = row.intercept_b + 10.0 * row.slope_n * np.log10(d) + rng.normal(0.0, row.rms_sigma, n)
    return np.column_stack([d, pg])


def street_canyon_dataset(seed=0, n_links=60, street_width=30.0, direct_block_db=-25.0,
                          d_range=(20.0, 200.0)):
    """VNLOS-style sidewalk where the strongest path bounces off the opposite facade.

    Rx and Tx sit on one sidewalk line (north = 0); the reflecting facade
    runs parallel at ``north = street_width``; Tx sit ``d_range`` metres
    down the street. Returns the dataset and the facade.
    """
    from .geometry import FacadeLine, aoi_image_source

    rng = np.random.default_rng(seed)
    rx = Position3D(0.0, 0.0, 0.0)
    facade = FacadeLine(Position3D(-1000.0, street_width, 0.0), Position3D(1000.0, street_width, 0.0))
    records = []
    xs = np.linspace(*d_range, n_links)
    for i, x in enumerate(xs):
        tx = Position3D(float(x), float(rng.uniform(-1.0, 1.0)), 0.0)
        spec_aoa = aoi_image_source(tx, rx, facade) + rng.normal(0.0, 1.5)
        direct_aoa = bearing(rx, tx)
        d = math.dist(tx.as_array(), rx.as_array())
        pg = -40.0 - 30.0 * math.log10(d) + rng.normal(0.0, 3.0)
        rec = synth_record(f"L{i + 1:03d}", tx, rx, pg, rng=rng, abg_db=13.0,
                           aoa=spec_aoa % 360.0, k_db=8.0)
        # weaker, partially blocked direct path
        ang = rec.azimuth
        extra = 10.0 ** ((pg + 22.0 + direct_block_db) / 10.0) * beam_pas_shape(ang, direct_aoa, HORN_AZ_HPBW)
        p = 10.0 ** (rec.power_dbm / 10.0) + extra
        samples = np.column_stack([rec.time, ang, 10.0 * np.log10(p)])
        records.append(PowerAngularRecord(rec.link_id, tx, rx, samples, rec.scan_count))
    ds = SidewalkDataset("Int-W-S", tuple(records), visual_los="VNLOS")
    return ds, facade
