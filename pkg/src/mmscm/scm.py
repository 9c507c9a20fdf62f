"""Spectrum Consumption Models: constructs, synthesis and canonical JSON.

The on-disk schema (``scm/1``) is a documented analog of the IEEE 1900.5.2
constructs, not a conforming implementation of the standard::

    {
      "schema": "scm/1",
      "id": "tx-0001",
      "kind": "transmitter" | "receiver",
      "reference_power_dbm": float,
      "spectrum_mask": {"breakpoints": [[freq_hz, rel_db], ...]},   # tx only
      "underlay_mask": {"breakpoints": [[freq_hz, rel_db], ...]},   # rx only
      "power_map": {"resolution_deg": float, "boresight_az_deg": float,
                    "gain_db": [[...n_el values...], ... n_az rows]},
      "propagation_map": {"resolution_deg": float, "default_exponent": float,
                          "exponent": [...n_az...], "measured": [...bool...]},
      "schedule": {"start": iso8601, "end": iso8601},
      "location": {"kind": "point" | "volume" | "trajectory",
                   "positions": [[east, north, up], ...]},
      "extras": {...opaque...}
    }

Power-map rows are azimuth offsets from boresight ``0, r, ..., 360 - r``;
columns are elevations ``-90, -90 + r, ..., 90``. Grid gains and exponents
are stored to 1e-4 so the canonical text is stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property

import numpy as np

from .ingest import AntennaPattern, Position3D

SCHEMA_VERSION = "scm/1"
GRID_DECIMALS = 4
DEFAULT_EXPONENT = 2.0
KINDS = ("transmitter", "receiver")
LOCATION_KINDS = ("point", "volume", "trajectory")
EXTRA_KEYS = ("intermodulation_mask", "platform_name",
              "min_power_spectral_flux_density", "policy_protocol")


class SchemaError(ValueError):
    """SCM document violates the schema; ``path`` points at the field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _quantize(a):
    return np.round(np.asarray(a, dtype=float), GRID_DECIMALS) + 0.0


@dataclass(frozen=True, eq=False)
class _Mask:
    """Piecewise-linear relative PSD (dB) over absolute frequency (Hz)."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 2 or bp.shape[1] != 2 or len(bp) < 2:
            raise ValueError("a mask needs at least two (freq, rel_db) breakpoints")
        if np.any(np.diff(bp[:, 0]) <= 0):
            raise ValueError("mask frequencies must be strictly increasing")
        if not np.all(np.isfinite(bp)):
            raise ValueError("mask breakpoints must be finite")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    @property
    def freqs(self):
        return self.breakpoints[:, 0]

    @property
    def span(self):
        return float(self.freqs[0]), float(self.freqs[-1])

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        v = np.interp(f, self.freqs, self.breakpoints[:, 1])
        out = np.where((f < self.freqs[0]) | (f > self.freqs[-1]), -np.inf, v)
        return out if out.ndim else float(out)

    @cached_property
    def plateau_width(self) -> float:
        """Width (Hz) of the region held at the mask's 0 dB level."""
        f, v = self.freqs, self.breakpoints[:, 1]
        flat = (np.abs(v[:-1]) < 1e-9) & (np.abs(v[1:]) < 1e-9)
        return float(np.sum(np.diff(f)[flat]))

    def shifted(self, df):
        bp = self.breakpoints.copy()
        bp[:, 0] += df
        return type(self)(bp)

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.breakpoints, other.breakpoints)

    __hash__ = None


class SpectrumMask(_Mask):
    pass


class UnderlayMask(_Mask):
    pass


def trapezoid_breakpoints(center, flat_width=1e6, skirt_width=0.5e6, skirt_db=-40.0):
    """Flat 0 dB top of ``flat_width`` with linear skirts down to ``skirt_db``."""
    h = flat_width / 2.0
    return np.array([[center - h - skirt_width, skirt_db], [center - h, 0.0],
                     [center + h, 0.0], [center + h + skirt_width, skirt_db]])


@dataclass(frozen=True, eq=False)
class PowerMap:
    """Relative gain (dB) over azimuth offset from boresight and elevation."""

    gain_db: np.ndarray
    resolution: float = 1.0
    boresight_az: float = 0.0

    def __post_init__(self):
        g = _quantize(self.gain_db)
        n_az = int(round(360.0 / self.resolution))
        n_el = int(round(180.0 / self.resolution)) + 1
        if abs(n_az * self.resolution - 360.0) > 1e-9 or abs((n_el - 1) * self.resolution - 180.0) > 1e-9:
            raise ValueError("resolution must divide 180 degrees")
        if g.shape != (n_az, n_el):
            raise ValueError(f"power map grid must be {n_az}x{n_el}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("power map entries must be finite")
        if abs(g.max()) > 1e-9:
            raise ValueError("power map maximum must be 0 dB")
        g.setflags(write=False)
        object.__setattr__(self, "gain_db", g)
        object.__setattr__(self, "boresight_az", float(self.boresight_az) % 360.0)

    def gain(self, bearing, elevation=0.0):
        """Bilinear (in dB) lookup at absolute bearing and elevation (deg)."""
        return self.gain_relative(np.asarray(bearing, dtype=float) - self.boresight_az, elevation)

    def gain_relative(self, offset, elevation=0.0):
        """Lookup by azimuth offset from boresight; broadcasts over arrays."""
        r = self.resolution
        n_az = self.gain_db.shape[0]
        az = (np.asarray(offset, dtype=float) % 360.0) / r
        el = (np.clip(np.asarray(elevation, dtype=float), -90.0, 90.0) + 90.0) / r
        i0 = np.floor(az).astype(int)
        j0 = np.minimum(np.floor(el).astype(int), self.gain_db.shape[1] - 2)
        ta, te = az - i0, el - j0
        i0 %= n_az
        i1 = (i0 + 1) % n_az
        g = self.gain_db
        top = g[i0, j0] * (1 - te) + g[i0, j0 + 1] * te
        bot = g[i1, j0] * (1 - te) + g[i1, j0 + 1] * te
        out = top * (1 - ta) + bot * ta
        return out if np.ndim(out) else float(out)

    def pointed(self, boresight_az) -> "PowerMap":
        """Same pattern steered to a new boresight; shares the grid."""
        pm = object.__new__(PowerMap)
        object.__setattr__(pm, "gain_db", self.gain_db)
        object.__setattr__(pm, "resolution", self.resolution)
        object.__setattr__(pm, "boresight_az", float(boresight_az) % 360.0)
        return pm

    def __eq__(self, other):
        return (isinstance(other, PowerMap) and self.resolution == other.resolution
                and self.boresight_az == other.boresight_az
                and np.array_equal(self.gain_db, other.gain_db))

    __hash__ = None

    @classmethod
    def isotropic(cls, resolution=1.0):
        n_az = int(round(360.0 / resolution))
        n_el = int(round(180.0 / resolution)) + 1
        return cls(np.zeros((n_az, n_el)), resolution)


def power_map_from_pattern(pattern: AntennaPattern, resolution: float = 1.0,
                           boresight_az: float = 0.0) -> PowerMap:
    """Combine the two cuts by summing them in dB.

    Values are clamped at the weakest level seen in either cut (the measured
    back-lobe floor) and shifted so the strongest direction is 0 dB.
    """
    n_az = int(round(360.0 / resolution))
    n_el = int(round(180.0 / resolution)) + 1
    az = np.arange(n_az) * resolution
    el = -90.0 + np.arange(n_el) * resolution
    g = pattern.azimuth_gain(az)[:, None] + pattern.elevation_gain(el)[None, :]
    floor = min(pattern.azimuth_cut[:, 1].min(), pattern.elevation_cut[:, 1].min())
    g = np.maximum(g, floor)
    return PowerMap(g - g.max(), resolution, boresight_az)


@dataclass(frozen=True, eq=False)
class PropagationMap:
    """Path-loss exponent per azimuth cell ``[i*r, (i+1)*r)``."""

    exponent: np.ndarray
    resolution: float = 1.0
    measured: np.ndarray | None = None
    default_exponent: float = DEFAULT_EXPONENT

    def __post_init__(self):
        e = _quantize(self.exponent)
        n_az = int(round(360.0 / self.resolution))
        if abs(n_az * self.resolution - 360.0) > 1e-9:
            raise ValueError("resolution must divide 360 degrees")
        if e.shape != (n_az,):
            raise ValueError(f"propagation map needs {n_az} azimuth cells")
        if np.any(~((e > 0) & (e < 10))):
            raise ValueError("path-loss exponents must lie in (0, 10)")
        m = np.ones(n_az, bool) if self.measured is None else np.asarray(self.measured, bool)
        if m.shape != e.shape:
            raise ValueError("measured flags must match the exponent grid")
        e.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "exponent", e)
        object.__setattr__(self, "measured", m)

    def _cell(self, bearing):
        idx = np.floor((np.asarray(bearing, dtype=float) % 360.0) / self.resolution).astype(int)
        return idx % len(self.exponent)

    def exponent_at(self, bearing):
        out = self.exponent[self._cell(bearing)]
        return out if np.ndim(out) else float(out)

    def is_default(self, bearing):
        out = ~self.measured[self._cell(bearing)]
        return out if np.ndim(out) else bool(out)

    def __eq__(self, other):
        return (isinstance(other, PropagationMap) and self.resolution == other.resolution
                and self.default_exponent == other.default_exponent
                and np.array_equal(self.exponent, other.exponent)
                and np.array_equal(self.measured, other.measured))

    __hash__ = None

    @classmethod
    def uniform(cls, exponent, resolution=1.0):
        n = int(round(360.0 / resolution))
        return cls(np.full(n, float(exponent)), resolution)


def _sector_cells(lo, hi, centers):
    lo, hi = lo % 360.0, hi % 360.0
    if hi == lo:
        return np.ones(len(centers), bool)
    if lo < hi:
        return (centers >= lo) & (centers < hi)
    return (centers >= lo) | (centers < hi)


def _sector_length(lo, hi):
    span = (hi - lo) % 360.0
    return 360.0 if span == 0 and hi != lo else span


def propagation_map_from_fits(fits, resolution: float = 1.0,
                              default_exponent: float = DEFAULT_EXPONENT) -> PropagationMap:
    """Azimuth sectors take ``|slope_n|`` of their fit; gaps get the default.

    ``fits`` is a sequence of ``((start_deg, end_deg), PathGainFit)``;
    sectors are half-open ``[start, end)`` clockwise and may wrap through
    north. ``(0, 360)`` covers everything.
    """
    n = int(round(360.0 / resolution))
    centers = (np.arange(n) + 0.5) * resolution
    exp = np.full(n, float(default_exponent))
    measured = np.zeros(n, bool)
    spans = []
    for (lo, hi), fit in fits:
        length = _sector_length(lo, hi)
        start = lo % 360.0
        for s0, l0 in spans:
            # circular interval overlap test
            if ((start - s0) % 360.0) < l0 or ((s0 - start) % 360.0) < length:
                raise ValueError(f"sector [{lo}, {hi}) overlaps another sector")
        spans.append((start, length))
        cells = np.ones(n, bool) if length >= 360.0 else _sector_cells(lo, hi, centers)
        exp[cells] = abs(fit.slope_n)
        measured[cells] = True
    return PropagationMap(exp, resolution, measured, default_exponent)


@dataclass(frozen=True)
class Schedule:
    start: datetime
    end: datetime

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("schedule start must precede end")

    def overlaps(self, other: "Schedule") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class ScmLocation:
    kind: str
    positions: tuple

    def __post_init__(self):
        if self.kind not in LOCATION_KINDS:
            raise ValueError(f"location kind must be one of {LOCATION_KINDS}")
        if not self.positions:
            raise ValueError("location geometry is empty")
        object.__setattr__(self, "positions", tuple(self.positions))

    @property
    def anchor(self) -> Position3D:
        return self.positions[0]

    @classmethod
    def point(cls, pos: Position3D):
        return cls("point", (pos,))


@dataclass(frozen=True)
class SpectrumConsumptionModel:
    kind: str
    reference_power: float
    power_map: PowerMap
    propagation_map: PropagationMap
    schedule: Schedule
    location: ScmLocation
    spectrum_mask: SpectrumMask | None = None
    underlay_mask: UnderlayMask | None = None
    model_id: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind == "transmitter":
            if self.spectrum_mask is None:
                raise ValueError("transmitter model requires a spectrum mask")
            if self.underlay_mask is not None:
                raise ValueError("transmitter model must not carry an underlay mask")
        else:
            if self.underlay_mask is None:
                raise ValueError("receiver model requires an underlay mask")
            if self.spectrum_mask is not None:
                raise ValueError("receiver model must not carry a spectrum mask")
        if self.spectrum_mask is not None and not isinstance(self.spectrum_mask, SpectrumMask):
            raise ValueError("spectrum_mask must be a SpectrumMask")
        if self.underlay_mask is not None and not isinstance(self.underlay_mask, UnderlayMask):
            raise ValueError("underlay_mask must be an UnderlayMask")
        if not math.isfinite(self.reference_power):
            raise ValueError("reference power must be finite")
        unknown = set(self.extras) - set(EXTRA_KEYS)
        if unknown:
            raise ValueError(f"unknown extras {sorted(unknown)}")

    @property
    def mask(self):
        return self.spectrum_mask if self.kind == "transmitter" else self.underlay_mask

    @property
    def position(self) -> Position3D:
        return self.location.anchor


def _as_power_map(pattern, resolution, boresight_az):
    if isinstance(pattern, PowerMap):
        return pattern.pointed(boresight_az) if boresight_az is not None else pattern
    if isinstance(pattern, AntennaPattern):
        return power_map_from_pattern(pattern, resolution, boresight_az or 0.0)
    raise ValueError("pattern must be an AntennaPattern or a PowerMap")


def build_tx_scm(ref_power, mask, pattern, prop, sched, loc, *, boresight_az=None,
                 resolution=1.0, model_id="", extras=None) -> SpectrumConsumptionModel:
    if not isinstance(mask, SpectrumMask):
        raise ValueError("transmitter model requires a SpectrumMask")
    return SpectrumConsumptionModel("transmitter", float(ref_power),
                                    _as_power_map(pattern, resolution, boresight_az),
                                    prop, sched, loc, spectrum_mask=mask,
                                    model_id=model_id, extras=dict(extras or {}))


def build_rx_scm(ref_power, underlay, pattern, prop, sched, loc, *, boresight_az=None,
                 resolution=1.0, model_id="", extras=None) -> SpectrumConsumptionModel:
    if not isinstance(underlay, UnderlayMask):
        raise ValueError("receiver model requires an UnderlayMask")
    return SpectrumConsumptionModel("receiver", float(ref_power),
                                    _as_power_map(pattern, resolution, boresight_az),
                                    prop, sched, loc, underlay_mask=underlay,
                                    model_id=model_id, extras=dict(extras or {}))


# ---------------------------------------------------------------- serialization

def _to_doc(m: SpectrumConsumptionModel) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "id": m.model_id,
        "kind": m.kind,
        "reference_power_dbm": float(m.reference_power),
        "power_map": {
            "resolution_deg": m.power_map.resolution,
            "boresight_az_deg": m.power_map.boresight_az,
            "gain_db": m.power_map.gain_db.tolist(),
        },
        "propagation_map": {
            "resolution_deg": m.propagation_map.resolution,
            "default_exponent": m.propagation_map.default_exponent,
            "exponent": m.propagation_map.exponent.tolist(),
            "measured": m.propagation_map.measured.tolist(),
        },
        "schedule": {"start": m.schedule.start.isoformat(), "end": m.schedule.end.isoformat()},
        "location": {"kind": m.location.kind,
                     "positions": [[float(p.east), float(p.north), float(p.up)]
                                   for p in m.location.positions]},
        "extras": m.extras,
    }
    if m.spectrum_mask is not None:
        doc["spectrum_mask"] = {"breakpoints": m.spectrum_mask.breakpoints.tolist()}
    if m.underlay_mask is not None:
        doc["underlay_mask"] = {"breakpoints": m.underlay_mask.breakpoints.tolist()}
    return doc


def serialize_scm(model: SpectrumConsumptionModel) -> bytes:
    return json.dumps(_to_doc(model), sort_keys=True, separators=(",", ":"),
                      allow_nan=False).encode("utf-8")


def _get(d, key, path, typ=None):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(path, f"missing field '{key}'")
    v = d[key]
    if typ is not None and not (isinstance(v, typ) and not isinstance(v, bool)):
        raise SchemaError(f"{path}.{key}", f"expected {getattr(typ, '__name__', typ)}")
    return v


def _num(d, key, path):
    return float(_get(d, key, path, (int, float)))


def _grid(v, path, ndim):
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(path, "expected a numeric array") from None
    if a.ndim != ndim:
        raise SchemaError(path, f"expected a {ndim}-D numeric array")
    return a


def _mask_from(doc, key, cls, path):
    sub = _get(doc, key, path, dict)
    bp = _grid(_get(sub, "breakpoints", f"{path}.{key}", list), f"{path}.{key}.breakpoints", 2)
    try:
        return cls(bp)
    except ValueError as exc:
        raise SchemaError(f"{path}.{key}.breakpoints", str(exc)) from None


def parse_scm(data) -> SpectrumConsumptionModel:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    p = "$"
    if not isinstance(doc, dict):
        raise SchemaError(p, "expected an object")
    if _get(doc, "schema", p, str) != SCHEMA_VERSION:
        raise SchemaError(f"{p}.schema", f"unsupported schema (want {SCHEMA_VERSION})")
    kind = _get(doc, "kind", p, str)
    if kind not in KINDS:
        raise SchemaError(f"{p}.kind", f"must be one of {KINDS}")
    if kind == "receiver" and "spectrum_mask" in doc:
        raise SchemaError(f"{p}.spectrum_mask", "receiver model must not carry a spectrum mask")
    if kind == "transmitter" and "underlay_mask" in doc:
        raise SchemaError(f"{p}.underlay_mask", "transmitter model must not carry an underlay mask")
    spectrum = _mask_from(doc, "spectrum_mask", SpectrumMask, p) if kind == "transmitter" else None
    underlay = _mask_from(doc, "underlay_mask", UnderlayMask, p) if kind == "receiver" else None

    pm_doc = _get(doc, "power_map", p, dict)
    pp = f"{p}.power_map"
    try:
        pm = PowerMap(_grid(_get(pm_doc, "gain_db", pp, list), f"{pp}.gain_db", 2),
                      _num(pm_doc, "resolution_deg", pp), _num(pm_doc, "boresight_az_deg", pp))
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(pp, str(exc)) from None

    prop_doc = _get(doc, "propagation_map", p, dict)
    pr = f"{p}.propagation_map"
    measured = _get(prop_doc, "measured", pr, list)
    if not all(isinstance(x, bool) for x in measured):
        raise SchemaError(f"{pr}.measured", "expected booleans")
    try:
        prop = PropagationMap(_grid(_get(prop_doc, "exponent", pr, list), f"{pr}.exponent", 1),
                              _num(prop_doc, "resolution_deg", pr), np.array(measured, bool),
                              _num(prop_doc, "default_exponent", pr))
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(pr, str(exc)) from None

    sd = _get(doc, "schedule", p, dict)
    try:
        sched = Schedule(datetime.fromisoformat(_get(sd, "start", f"{p}.schedule", str)),
                         datetime.fromisoformat(_get(sd, "end", f"{p}.schedule", str)))
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{p}.schedule", str(exc)) from None

    ld = _get(doc, "location", p, dict)
    pos_raw = _get(ld, "positions", f"{p}.location", list)
    try:
        positions = tuple(Position3D(*map(float, xyz)) for xyz in pos_raw)
        loc = ScmLocation(_get(ld, "kind", f"{p}.location", str), positions)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{p}.location", str(exc)) from None

    extras = doc.get("extras", {})
    if not isinstance(extras, dict):
        raise SchemaError(f"{p}.extras", "expected an object")
    try:
        return SpectrumConsumptionModel(
            kind, _num(doc, "reference_power_dbm", p), pm, prop, sched, loc,
            spectrum_mask=spectrum, underlay_mask=underlay,
            model_id=_get(doc, "id", p, str), extras=extras)
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(p, str(exc)) from None


def read_scm(path) -> SpectrumConsumptionModel:
    with open(path, "rb") as fh:
        return parse_scm(fh.read())


def write_scm(model: SpectrumConsumptionModel, path):
    with open(path, "wb") as fh:
        fh.write(serialize_scm(model))
