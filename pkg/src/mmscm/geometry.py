"""Distances, bearings and angle-of-incidence constructions.

Bearings are degrees clockwise from north on the east/north plane. All
angle-of-incidence helpers work in the horizontal plane only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ingest import Position3D

_EPS = 1e-9


@dataclass(frozen=True)
class FacadeLine:
    """Building face between two points; the up component is ignored."""

    point_a: Position3D
    point_b: Position3D

    def __post_init__(self):
        if math.hypot(self.point_b.east - self.point_a.east,
                      self.point_b.north - self.point_a.north) < _EPS:
            raise ValueError("degenerate facade: endpoints coincide horizontally")


@dataclass(frozen=True)
class CornerPoint:
    pos: Position3D


def link_distance_3d(tx: Position3D, rx: Position3D) -> float:
    return math.sqrt((tx.east - rx.east) ** 2 + (tx.north - rx.north) ** 2
                     + (tx.up - rx.up) ** 2)


def horizontal_distance(a: Position3D, b: Position3D) -> float:
    return math.hypot(b.east - a.east, b.north - a.north)


def bearing(frm: Position3D, to: Position3D) -> float:
    de = to.east - frm.east
    dn = to.north - frm.north
    if math.hypot(de, dn) < _EPS:
        raise ValueError("bearing undefined for coincident horizontal positions")
    b = math.degrees(math.atan2(de, dn)) % 360.0
    # atan2 of a tiny negative east offset can round to exactly 360.0
    return 0.0 if b >= 360.0 else b


def zenith_angle(tx: Position3D, rx: Position3D) -> float:
    """Elevation offset (deg) of the rx-to-tx ray from the horizontal plane.

    Symmetric in its arguments; 0 for co-elevated points.
    """
    h = horizontal_distance(tx, rx)
    dz = abs(tx.up - rx.up)
    if h < _EPS and dz < _EPS:
        raise ValueError("zenith angle undefined for coincident points")
    return math.degrees(math.atan2(dz, h))


def aoi_direct(tx: Position3D, rx: Position3D) -> float:
    return bearing(rx, tx)


def _facade_frame(facade: FacadeLine):
    ax, ay = facade.point_a.east, facade.point_a.north
    ux = facade.point_b.east - ax
    uy = facade.point_b.north - ay
    norm = math.hypot(ux, uy)
    return ax, ay, ux / norm, uy / norm


def _project(p: Position3D, frame):
    ax, ay, ux, uy = frame
    return (p.east - ax) * ux + (p.north - ay) * uy


def _signed_offset(p: Position3D, frame):
    ax, ay, ux, uy = frame
    return (p.east - ax) * uy - (p.north - ay) * ux


def reflection_point(tx: Position3D, rx: Position3D, facade: FacadeLine,
                     method: str = "specular") -> Position3D:
    """Reflection point on the facade line.

    ``specular`` splits the along-facade span between the tx and rx
    projections in proportion to their distances from the facade (equal
    angles of incidence and reflection). ``midpoint`` takes the plain
    along-facade midpoint; the two agree when tx and rx are equidistant
    from the facade.
    """
    frame = _facade_frame(facade)
    ax, ay, ux, uy = frame
    s_tx, s_rx = _project(tx, frame), _project(rx, frame)
    if method == "midpoint":
        s = 0.5 * (s_tx + s_rx)
    elif method == "specular":
        h_tx, h_rx = _signed_offset(tx, frame), _signed_offset(rx, frame)
        if h_tx * h_rx <= 0 or abs(h_tx) < _EPS or abs(h_rx) < _EPS:
            raise ValueError("tx and rx must lie strictly on the same side of the facade")
        h_tx, h_rx = abs(h_tx), abs(h_rx)
        s = (s_tx * h_rx + s_rx * h_tx) / (h_tx + h_rx)
    else:
        raise ValueError(f"unknown reflection method {method!r}")
    return Position3D(ax + s * ux, ay + s * uy, 0.0)


def mirror_across(p: Position3D, facade: FacadeLine) -> Position3D:
    """Mirror image of ``p`` across the facade line (horizontal plane)."""
    frame = _facade_frame(facade)
    ax, ay, ux, uy = frame
    s = _project(p, frame)
    fx, fy = ax + s * ux, ay + s * uy
    return Position3D(2 * fx - p.east, 2 * fy - p.north, p.up)


def aoi_reflection(tx: Position3D, rx: Position3D, facade: FacadeLine,
                   method: str = "specular") -> float:
    return bearing(rx, reflection_point(tx, rx, facade, method))


def aoi_image_source(tx: Position3D, rx: Position3D, facade: FacadeLine) -> float:
    """Specular AoI: bearing from rx to the image of tx mirrored in the facade."""
    return bearing(rx, mirror_across(tx, facade))


def aoi_diffraction(rx: Position3D, corner: CornerPoint) -> float:
    return bearing(rx, corner.pos)


def angular_deviation(aoa: float, aoi: float) -> float:
    d = abs(aoa - aoi) % 360.0
    return min(d, 360.0 - d)
