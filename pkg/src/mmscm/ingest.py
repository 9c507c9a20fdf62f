"""Measurement files, antenna patterns and sidewalk datasets.

Measurement file format (``mms/1``)
-----------------------------------
Text, ``#``-prefixed header lines followed by a CSV body::

    # mms/1
    # sidewalk_id: Int-S-W
    # condition: standard
    # visual_los: VNLOS
    # tx_power_dbm: 22
    # rx_nominal_azimuth_gain_dbi: 14.5
    # rx_total_gain_dbi: 24
    # power_accuracy_db: 0.15
    # link: L001 tx=12.0,-80.5,0.0 rx=0.0,0.0,15.0 scans=40
    link_id,time_s,azimuth_deg,power_dbm
    L001,0.0000,0.000,-83.2140
    ...

Every ``link`` header declares one record; body rows reference it by id.
Azimuths are clockwise bearings from true north in [0, 360).

Antenna pattern format
----------------------
Two labelled cut sections of ``angle_deg,rel_gain_db`` rows::

    # peak_gain_dbi: 24
    [azimuth]
    -180,-35.0
    ...
    [elevation]
    -180,-35.0
    ...
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = "mms/1"

FULL_FIDELITY_SAMPLES = 16000
FULL_FIDELITY_SCANS = 40
SOUNDER_PG_MAX_DB = -62.0
SOUNDER_PG_MIN_DB = -161.0

CONDITIONS = ("standard", "no_leaves", "tx_raised", "swap", "street", "wall", "adjacent")
VISUAL_LOS = ("VLOS", "VNLOS")

_SIDEWALK_RE = re.compile(r"^[A-Za-z]+(-[A-Za-z0-9]+){2,3}$")
_COORD_LIMIT = 1e5


class ParseError(ValueError):
    """Raised for malformed measurement or pattern files."""

    def __init__(self, msg, line=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {msg}" if prefix else msg)
        self.line = line


@dataclass(frozen=True)
class Position3D:
    """Point in a site-local east/north/up frame, meters."""

    east: float
    north: float
    up: float = 0.0

    def __post_init__(self):
        for name in ("east", "north", "up"):
            v = getattr(self, name)
            if not math.isfinite(v) or abs(v) >= _COORD_LIMIT:
                raise ValueError(f"{name}={v!r} is not a finite coordinate below 1e5 m")

    def as_array(self) -> np.ndarray:
        return np.array([self.east, self.north, self.up], dtype=float)

    @classmethod
    def parse(cls, text: str) -> "Position3D":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected 'e,n,u', got {text!r}")
        return cls(*parts)

    def __str__(self):
        return f"{self.east:.6f},{self.north:.6f},{self.up:.6f}"


@dataclass(frozen=True, eq=False)
class PowerAngularRecord:
    """Raw samples of one Tx-Rx link from the rotating receiver.

    ``samples`` is an (N, 3) array of (time_s, azimuth_deg, power_dbm).
    """

    link_id: str
    tx_pos: Position3D
    rx_pos: Position3D
    samples: np.ndarray
    scan_count: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3:
            raise ValueError("samples must have shape (N, 3)")
        if s.shape[0] and np.any(np.diff(s[:, 0]) < 0):
            raise ValueError(f"link {self.link_id}: time is not nondecreasing")
        az = s[:, 1]
        if np.any((az < 0) | (az >= 360)):
            raise ValueError(f"link {self.link_id}: azimuth outside [0, 360)")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def time(self):
        return self.samples[:, 0]

    @property
    def azimuth(self):
        return self.samples[:, 1]

    @property
    def power_dbm(self):
        return self.samples[:, 2]

    @property
    def distance(self) -> float:
        from .geometry import link_distance_3d

        return link_distance_3d(self.tx_pos, self.rx_pos)

    @property
    def full_fidelity(self) -> bool:
        return (len(self.samples) >= FULL_FIDELITY_SAMPLES
                and self.scan_count >= FULL_FIDELITY_SCANS)


@dataclass(frozen=True)
class SidewalkDataset:
    sidewalk_id: str
    records: tuple
    condition: str = "standard"
    visual_los: str = "VLOS"
    tx_power: float = 22.0
    rx_nominal_azimuth_gain: float = 14.5
    rx_total_gain: float = 24.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not _SIDEWALK_RE.match(self.sidewalk_id):
            raise ValueError(f"sidewalk id {self.sidewalk_id!r} is not in LOC-D-S[-C] form")
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.visual_los not in VISUAL_LOS:
            raise ValueError(f"visual_los must be one of {VISUAL_LOS}")
        recs = tuple(sorted(self.records, key=lambda r: r.distance))
        object.__setattr__(self, "records", recs)

    @property
    def distances(self) -> np.ndarray:
        return np.array([r.distance for r in self.records])

    def __len__(self):
        return len(self.records)


def unique_ids(datasets):
    """Check sidewalk ids are unique across a collection; return them."""
    seen = set()
    for ds in datasets:
        if ds.sidewalk_id in seen:
            raise ValueError(f"duplicate sidewalk id {ds.sidewalk_id!r}")
        seen.add(ds.sidewalk_id)
    return seen


_HEADER_KEYS = {
    "sidewalk_id": str,
    "condition": str,
    "visual_los": str,
    "tx_power_dbm": float,
    "rx_nominal_azimuth_gain_dbi": float,
    "rx_total_gain_dbi": float,
}


def _parse_link_header(value, lineno, path):
    toks = value.split()
    if not toks:
        raise ParseError("empty link declaration", lineno, path)
    link_id = toks[0]
    kv = {}
    for t in toks[1:]:
        if "=" not in t:
            raise ParseError(f"bad link field {t!r}", lineno, path)
        k, v = t.split("=", 1)
        kv[k] = v
    try:
        tx = Position3D.parse(kv["tx"])
        rx = Position3D.parse(kv["rx"])
        scans = int(kv.get("scans", 0))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"link {link_id}: {exc}", lineno, path) from None
    return link_id, tx, rx, scans


def parse_measurement_text(text: str, path=None) -> SidewalkDataset:
    lines = text.splitlines()
    if not any(ln.strip() for ln in lines):
        raise ParseError("empty file", path=path)

    meta = {}
    links = {}
    order = []
    rows = {}
    seen_version = False
    seen_columns = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body == FORMAT_VERSION:
                seen_version = True
                continue
            if ":" not in body:
                continue
            key, value = (s.strip() for s in body.split(":", 1))
            if key == "link":
                link_id, tx, rx, scans = _parse_link_header(value, lineno, path)
                if link_id in links:
                    raise ParseError(f"duplicate link {link_id!r}", lineno, path)
                links[link_id] = (tx, rx, scans)
                order.append(link_id)
                rows[link_id] = []
            else:
                meta[key] = value
            continue
        if not seen_version:
            raise ParseError(f"missing '# {FORMAT_VERSION}' header", lineno, path)
        if not seen_columns:
            cols = [c.strip() for c in line.split(",")]
            if cols != ["link_id", "time_s", "azimuth_deg", "power_dbm"]:
                raise ParseError(f"unexpected column header {line!r}", lineno, path)
            seen_columns = True
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", lineno, path)
        link_id = parts[0].strip()
        if link_id not in links:
            raise ParseError(f"row references undeclared link {link_id!r}", lineno, path)
        try:
            t, az, p = (float(x) for x in parts[1:])
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno, path) from None
        if not (math.isfinite(t) and math.isfinite(p)):
            raise ParseError("non-finite time or power", lineno, path)
        if not 0.0 <= az < 360.0:
            raise ParseError(f"azimuth {az} outside [0, 360)", lineno, path)
        if rows[link_id] and t < rows[link_id][-1][0]:
            raise ParseError(f"time decreases for link {link_id}", lineno, path)
        rows[link_id].append((t, az, p))

    if not seen_version:
        raise ParseError(f"missing '# {FORMAT_VERSION}' header", path=path)
    if not links:
        raise ParseError("no link declarations", path=path)

    records = []
    for link_id in order:
        tx, rx, scans = links[link_id]
        if not rows[link_id]:
            raise ParseError(f"link {link_id!r} has no samples", path=path)
        records.append(PowerAngularRecord(link_id, tx, rx,
                                          np.array(rows[link_id], dtype=float), scans))

    kwargs = {}
    try:
        for key, conv in _HEADER_KEYS.items():
            if key in meta:
                kwargs[key] = conv(meta.pop(key))
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", path=path) from None
    if "sidewalk_id" not in kwargs:
        raise ParseError("missing sidewalk_id header", path=path)
    try:
        return SidewalkDataset(
            sidewalk_id=kwargs["sidewalk_id"],
            records=tuple(records),
            condition=kwargs.get("condition", "standard"),
            visual_los=kwargs.get("visual_los", "VLOS"),
            tx_power=kwargs.get("tx_power_dbm", 22.0),
            rx_nominal_azimuth_gain=kwargs.get("rx_nominal_azimuth_gain_dbi", 14.5),
            rx_total_gain=kwargs.get("rx_total_gain_dbi", 24.0),
            metadata=meta,
        )
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def parse_measurement_file(path) -> SidewalkDataset:
    path = Path(path)
    return parse_measurement_text(path.read_text(), path=path)


def serialize_dataset(ds: SidewalkDataset) -> str:
    out = [
        f"# {FORMAT_VERSION}",
        f"# sidewalk_id: {ds.sidewalk_id}",
        f"# condition: {ds.condition}",
        f"# visual_los: {ds.visual_los}",
        f"# tx_power_dbm: {ds.tx_power!r}",
        f"# rx_nominal_azimuth_gain_dbi: {ds.rx_nominal_azimuth_gain!r}",
        f"# rx_total_gain_dbi: {ds.rx_total_gain!r}",
    ]
    for k, v in sorted(ds.metadata.items()):
        out.append(f"# {k}: {v}")
    for r in ds.records:
        out.append(f"# link: {r.link_id} tx={r.tx_pos} rx={r.rx_pos} scans={r.scan_count}")
    out.append("link_id,time_s,azimuth_deg,power_dbm")
    for r in ds.records:
        for t, az, p in r.samples:
            out.append(f"{r.link_id},{t:.6f},{az:.6f},{p:.6f}")
    return "\n".join(out) + "\n"


def write_measurement_file(ds: SidewalkDataset, path):
    Path(path).write_text(serialize_dataset(ds))


@dataclass(frozen=True, eq=False)
class AntennaPattern:
    """Normalized two-cut antenna pattern.

    Angles are degrees in [-180, 180]; gains are dB relative to the peak.
    """

    azimuth_cut: np.ndarray
    elevation_cut: np.ndarray
    peak_gain: float = 0.0

    def __post_init__(self):
        for name in ("azimuth_cut", "elevation_cut"):
            cut = np.asarray(getattr(self, name), dtype=float)
            if cut.ndim != 2 or cut.shape[1] != 2 or len(cut) < 2:
                raise ValueError(f"{name} must be a sequence of (angle, gain) pairs")
            if np.any(np.diff(cut[:, 0]) <= 0):
                raise ValueError(f"{name}: angle grid not strictly increasing")
            if cut[0, 0] > -180 or cut[-1, 0] < 180:
                raise ValueError(f"{name}: angles must cover [-180, 180]")
            cut.setflags(write=False)
            object.__setattr__(self, name, cut)

    def azimuth_gain(self, angle):
        """Relative gain (dB) at an azimuth offset from boresight."""
        a = (np.asarray(angle, dtype=float) + 180.0) % 360.0 - 180.0
        return np.interp(a, self.azimuth_cut[:, 0], self.azimuth_cut[:, 1])

    def elevation_gain(self, angle):
        a = np.asarray(angle, dtype=float)
        lo, hi = self.elevation_cut[0, 0], self.elevation_cut[-1, 0]
        if np.any((a < lo) | (a > hi)):
            raise ValueError(f"elevation angle outside pattern coverage [{lo}, {hi}]")
        return np.interp(a, self.elevation_cut[:, 0], self.elevation_cut[:, 1])

    def gain_dbi(self, azimuth, elevation=0.0):
        return self.peak_gain + self.azimuth_gain(azimuth) + self.elevation_gain(elevation)

    @classmethod
    def isotropic(cls, peak_gain=0.0):
        cut = np.array([[-180.0, 0.0], [180.0, 0.0]])
        return cls(cut, cut.copy(), peak_gain)


def parse_antenna_text(text: str, path=None) -> AntennaPattern:
    peak = None
    cuts = {"azimuth": [], "elevation": []}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("peak_gain_dbi:"):
                try:
                    peak = float(body.split(":", 1)[1])
                except ValueError:
                    raise ParseError("bad peak_gain_dbi", lineno, path) from None
            continue
        if line.startswith("["):
            name = line.strip("[]").strip().lower()
            if name not in cuts:
                raise ParseError(f"unknown section {line!r}", lineno, path)
            current = name
            continue
        if current is None:
            raise ParseError("data row before any [azimuth]/[elevation] section", lineno, path)
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError("expected 'angle_deg,rel_gain_db'", lineno, path)
        try:
            ang, g = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric row {line!r}", lineno, path) from None
        if g > 0.01:
            raise ParseError(f"relative gain {g} dB is positive", lineno, path)
        rows = cuts[current]
        if rows and ang <= rows[-1][0]:
            raise ParseError("angle grid not strictly increasing", lineno, path)
        rows.append((ang, g))

    for name, rows in cuts.items():
        if len(rows) < 2:
            raise ParseError(f"section [{name}] needs at least two rows", path=path)
    az = np.array(cuts["azimuth"])
    el = np.array(cuts["elevation"])
    peak = 0.0 if peak is None else peak
    # renormalize so the strongest direction is 0 dB; peak gain absorbs the shift
    top = max(az[:, 1].max(), el[:, 1].max())
    az[:, 1] -= top
    el[:, 1] -= top
    try:
        return AntennaPattern(az, el, peak + top)
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def parse_antenna_pattern(path) -> AntennaPattern:
    path = Path(path)
    return parse_antenna_text(path.read_text(), path=path)


def serialize_antenna_pattern(pattern: AntennaPattern) -> str:
    out = [f"# peak_gain_dbi: {pattern.peak_gain!r}", "[azimuth]"]
    out += [f"{a!r},{g!r}" for a, g in pattern.azimuth_cut.tolist()]
    out.append("[elevation]")
    out += [f"{a!r},{g!r}" for a, g in pattern.elevation_cut.tolist()]
    return "\n".join(out) + "\n"


@dataclass
class ValidationReport:
    sidewalk_id: str
    warnings: list = field(default_factory=list)

    def add(self, link_id, message):
        self.warnings.append((link_id, message))

    def __bool__(self):
        return bool(self.warnings)

    def __len__(self):
        return len(self.warnings)


def validate_dataset(ds: SidewalkDataset, pattern: AntennaPattern | None = None) -> ValidationReport:
    """Collect per-link plausibility warnings; never raises on data content."""
    from .geometry import zenith_angle
    from .metrics import average_pas, elevation_correction, path_gain

    report = ValidationReport(ds.sidewalk_id)
    last_d = None
    for rec in ds.records:
        n = len(rec.samples)
        if n < FULL_FIDELITY_SAMPLES:
            report.add(rec.link_id, f"only {n} samples (< {FULL_FIDELITY_SAMPLES})")
        if rec.scan_count < FULL_FIDELITY_SCANS:
            report.add(rec.link_id, f"only {rec.scan_count} scans (< {FULL_FIDELITY_SCANS})")
        d = rec.distance
        if last_d is not None and abs(d - last_d) < 1e-9:
            report.add(rec.link_id, f"duplicate distance {d:.3f} m")
        last_d = d
        try:
            pas = average_pas(rec)
        except ValueError as exc:
            report.add(rec.link_id, f"cannot build PAS: {exc}")
            continue
        corr = 0.0
        if pattern is not None:
            try:
                corr = float(elevation_correction(pattern, zenith_angle(rec.tx_pos, rec.rx_pos)))
            except ValueError:
                pass
        pg = path_gain(pas, ds.tx_power, corr)
        if pg < SOUNDER_PG_MIN_DB:
            report.add(rec.link_id, f"path gain {pg:.1f} dB below sounder floor")
        elif pg > SOUNDER_PG_MAX_DB:
            report.add(rec.link_id, f"path gain {pg:.1f} dB above sounder ceiling")
    return report
