import json
import time
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmscm.ingest import AntennaPattern, Position3D
from mmscm.pathloss import PathGainFit
from mmscm.scm import (PowerMap, PropagationMap, Schedule, SchemaError, ScmLocation,
                       SpectrumConsumptionModel, SpectrumMask, UnderlayMask, build_rx_scm,
                       build_tx_scm, parse_scm, power_map_from_pattern,
                       propagation_map_from_fits, read_scm, serialize_scm,
                       trapezoid_breakpoints, write_scm)
from mmscm.synth import horn_pattern

SCHED = Schedule(datetime(2024, 1, 1, tzinfo=timezone.utc), datetime(2024, 1, 2, tzinfo=timezone.utc))
LOC = ScmLocation.point(Position3D(0, 0, 0))
BP = trapezoid_breakpoints(28e9)
ISO = AntennaPattern(np.array([[-180, 0.0], [180, 0.0]]), np.array([[-180, 0.0], [180, 0.0]]))


def _fit(n):
    return PathGainFit(n, -40.0, 3.0, 10, 300, 50)


def _tx(pattern=ISO, resolution=1.0, **kw):
    return build_tx_scm(10.0, SpectrumMask(BP), pattern, PropagationMap.uniform(2.8, resolution),
                        SCHED, LOC, resolution=resolution, model_id="tx-1", **kw)


def _rx(pattern=ISO, resolution=1.0, **kw):
    return build_rx_scm(-90.0, UnderlayMask(BP), pattern, PropagationMap.uniform(2.8, resolution),
                        SCHED, LOC, resolution=resolution, model_id="rx-1", **kw)


def test_isotropic_power_map():
    assert np.all(_tx().power_map.gain_db == 0.0)
    assert np.all(_rx().power_map.gain_db == 0.0)


def test_horn_sum_rule():
    pat = horn_pattern()
    pm = power_map_from_pattern(pat)
    assert pm.gain_db.max() == 0.0
    assert pm.gain(0.0, 0.0) == 0.0
    want = float(pat.azimuth_gain(180.0)) + float(pat.elevation_gain(0.0))
    assert pm.gain(180.0, 0.0) == pytest.approx(want, abs=1e-4)
    # clamped at the weakest point of either cut
    assert pm.gain_db.min() == pytest.approx(-25.0, abs=1e-4)


def test_power_map_steering():
    pm = power_map_from_pattern(horn_pattern(), boresight_az=90.0)
    assert pm.gain(90.0) == 0.0
    assert pm.gain(270.0) == pytest.approx(pm.gain_relative(180.0))
    assert pm.pointed(10.0).gain(10.0) == 0.0


def test_power_map_knots_and_bilinear():
    g = np.zeros((360, 181))
    g[10, 90], g[11, 90] = -2.0, -4.0
    g[10, 91] = -6.0
    pm = PowerMap(g)
    assert pm.gain(10.0, 0.0) == -2.0
    assert pm.gain(10.5, 0.0) == pytest.approx(-3.0)
    assert pm.gain(10.0, 0.5) == pytest.approx(-4.0)
    assert pm.gain(370.0, 0.0) == -2.0


def test_power_map_invariants():
    with pytest.raises(ValueError, match="0 dB"):
        PowerMap(np.full((360, 181), -1.0))
    with pytest.raises(ValueError, match="grid"):
        PowerMap(np.zeros((10, 10)))
    with pytest.raises(ValueError):
        PowerMap.isotropic(7.0)


def test_missing_masks():
    with pytest.raises(ValueError):
        build_tx_scm(10.0, UnderlayMask(BP), ISO, PropagationMap.uniform(2), SCHED, LOC)
    with pytest.raises(ValueError):
        build_rx_scm(10.0, SpectrumMask(BP), ISO, PropagationMap.uniform(2), SCHED, LOC)
    pm, prop = PowerMap.isotropic(), PropagationMap.uniform(2)
    with pytest.raises(ValueError, match="requires a spectrum mask"):
        SpectrumConsumptionModel("transmitter", 0.0, pm, prop, SCHED, LOC)
    with pytest.raises(ValueError, match="requires an underlay mask"):
        SpectrumConsumptionModel("receiver", 0.0, pm, prop, SCHED, LOC)


def test_masks():
    m = SpectrumMask(BP)
    for f, v in BP:
        assert m(f) == v
    assert m(28e9) == 0.0
    assert m(BP[0, 0] + 0.25e6) == pytest.approx(-20.0)
    assert m(BP[0, 0] - 1.0) == -np.inf and m(BP[-1, 0] + 1.0) == -np.inf
    assert m.plateau_width == pytest.approx(1e6)
    with pytest.raises(ValueError):
        SpectrumMask([[1.0, 0.0]])
    with pytest.raises(ValueError):
        SpectrumMask([[2.0, 0.0], [1.0, 0.0]])


@given(st.floats(0, 1))
def test_mask_linear_between_breakpoints(t):
    m = UnderlayMask([[0.0, -10.0], [100.0, 20.0]])
    assert m(100.0 * t) == pytest.approx(-10.0 + 30.0 * t)


def test_schedule_and_location():
    with pytest.raises(ValueError):
        Schedule(SCHED.end, SCHED.start)
    with pytest.raises(ValueError):
        ScmLocation("orbit", (Position3D(0, 0, 0),))
    with pytest.raises(ValueError):
        ScmLocation("point", ())


def test_propagation_single_fit():
    pm = propagation_map_from_fits([((0, 360), _fit(-2.6))])
    assert np.all(pm.exponent == 2.6)
    assert not pm.is_default(123.0)


def test_propagation_two_sectors():
    pm = propagation_map_from_fits([((0, 180), _fit(-2.2)), ((180, 360), _fit(-3.6))])
    assert pm.exponent_at(90.0) == 2.2
    assert pm.exponent_at(270.0) == 3.6


def test_propagation_gap_default():
    pm = propagation_map_from_fits([((350, 20), _fit(-3.0))])
    assert pm.exponent_at(5.0) == 3.0 and pm.exponent_at(355.0) == 3.0
    assert pm.exponent_at(100.0) == 2.0
    assert pm.is_default(100.0) and not pm.is_default(5.0)


def test_propagation_overlap_and_range():
    with pytest.raises(ValueError, match="overlap"):
        propagation_map_from_fits([((0, 90), _fit(-2)), ((80, 120), _fit(-3))])
    with pytest.raises(ValueError, match="overlap"):
        propagation_map_from_fits([((350, 10), _fit(-2)), ((5, 20), _fit(-3))])
    with pytest.raises(ValueError):
        PropagationMap.uniform(12.0)


@pytest.mark.parametrize("make", [_tx, _rx])
def test_round_trip_identity(make):
    m = make(pattern=horn_pattern(), boresight_az=33.0,
             extras={"platform_name": "sidewalk-node"})
    raw = serialize_scm(m)
    back = parse_scm(raw)
    assert back == m
    assert serialize_scm(back) == raw
    assert raw == json.dumps(json.loads(raw), sort_keys=True, separators=(",", ":")).encode()


def test_file_round_trip(tmp_path):
    p = tmp_path / "m.json"
    write_scm(_tx(), p)
    assert read_scm(p) == _tx()


def _doc(model):
    return json.loads(serialize_scm(model))


def test_rx_with_spectrum_mask_rejected():
    doc = _doc(_rx(resolution=10.0))
    doc["spectrum_mask"] = {"breakpoints": BP.tolist()}
    with pytest.raises(SchemaError, match="receiver model must not carry a spectrum mask") as ei:
        parse_scm(json.dumps(doc))
    assert ei.value.path == "$.spectrum_mask"


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("schedule"), "$"),
    (lambda d: d.update(schema="scm/2"), "$.schema"),
    (lambda d: d["power_map"].update(gain_db="x"), "$.power_map.gain_db"),
    (lambda d: d["propagation_map"].update(measured=[1] * 36), "$.propagation_map.measured"),
    (lambda d: d["spectrum_mask"].update(breakpoints=[[2, 0], [1, 0]]), "$.spectrum_mask.breakpoints"),
    (lambda d: d.update(extras={"bogus": 1}), "$"),
])
def test_schema_errors_carry_paths(mutate, path):
    doc = _doc(_tx(resolution=10.0))
    mutate(doc)
    with pytest.raises(SchemaError) as ei:
        parse_scm(json.dumps(doc))
    assert ei.value.path == path


def test_invalid_json():
    with pytest.raises(SchemaError, match="invalid JSON"):
        parse_scm(b"{")


def test_one_degree_size_and_parse_time():
    m = _tx(pattern=horn_pattern())
    raw = serialize_scm(m)
    assert 100e3 <= len(raw) <= 1e6
    t0 = time.perf_counter()
    parse_scm(raw)
    assert time.perf_counter() - t0 < 1.0
