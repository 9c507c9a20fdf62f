import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmscm.compat import (CompatReport, aggregate_margin, allowed_psd, directional_gain,
                          frequency_grid, path_loss_between, received_psd, received_psd_matrix)
from mmscm.geometry import bearing
from mmscm.ingest import Position3D as P
from mmscm.pathloss import fspl
from mmscm.scm import (PowerMap, PropagationMap, Schedule, ScmLocation, SpectrumMask,
                       UnderlayMask, build_rx_scm, build_tx_scm, power_map_from_pattern,
                       trapezoid_breakpoints)
from mmscm.synth import horn_pattern

from oracles import friis_db

F0 = 28e9
SCHED = Schedule(datetime(2024, 1, 1, tzinfo=timezone.utc), datetime(2024, 1, 2, tzinfo=timezone.utc))
BP = trapezoid_breakpoints(F0)
ISO = PowerMap.isotropic(10.0)
HORN = power_map_from_pattern(horn_pattern())


def tx(pos, power=10.0, pmap=ISO, n=2.0, bp=BP, boresight=None, mid="tx"):
    return build_tx_scm(power, SpectrumMask(bp), pmap, PropagationMap.uniform(n, pmap.resolution),
                        SCHED, ScmLocation.point(P(*pos)), boresight_az=boresight, model_id=mid)


def rx(pos, ref=-90.0, pmap=ISO, n=2.0, bp=BP, boresight=None):
    return build_rx_scm(ref, UnderlayMask(bp), pmap, PropagationMap.uniform(n, pmap.resolution),
                        SCHED, ScmLocation.point(P(*pos)), boresight_az=boresight, model_id="rx")


def test_directional_gain_examples():
    g = np.zeros((36, 19))
    g[4, 9], g[5, 9] = -2.0, -4.0
    pm = PowerMap(g, 10.0)
    assert directional_gain(pm, 0.0) == 0.0
    assert directional_gain(pm, 40.0) == -2.0
    assert directional_gain(pm, 45.0) == pytest.approx(-3.0)


def test_path_loss_between():
    d = np.array([1.0, 10.0, 250.0])
    np.testing.assert_allclose(path_loss_between(PropagationMap.uniform(2.0), 0.0, d, F0),
                               -fspl(d, F0), rtol=0, atol=1e-12)
    pl = path_loss_between(PropagationMap.uniform(2.8), 17.0, 100.0, F0)
    assert pl == pytest.approx(61.39 + 56.0, abs=0.02)
    assert path_loss_between(PropagationMap.uniform(2.8), 0.0, 1.0, F0) == pytest.approx(-fspl(1.0, F0))
    with pytest.raises(ValueError):
        path_loss_between(PropagationMap.uniform(2.0), 0.0, 0.5, F0)


def test_friis_budget():
    t, r = tx((30, 40, 0)), rx((0, 0, 0))
    assert received_psd(t, r, F0) == pytest.approx(10.0 - friis_db(50.0, F0), abs=0.02)


def test_front_to_back():
    t = tx((0, 100, 0))
    facing = rx((0, 0, 0), pmap=HORN, boresight=0.0)
    away = rx((0, 0, 0), pmap=HORN, boresight=180.0)
    ftb = HORN.gain(0.0) - HORN.gain(180.0)
    assert ftb > 20
    assert received_psd(t, facing, F0) - received_psd(t, away, F0) == pytest.approx(ftb)


def test_outside_mask_is_no_emission():
    t, r = tx((10, 0, 0)), rx((0, 0, 0))
    assert received_psd(t, r, F0 + 5e6) == -math.inf
    assert allowed_psd(r, F0 + 5e6) == -math.inf


def test_coincident():
    with pytest.raises(ValueError):
        received_psd(tx((0, 0, 5)), rx((0, 0, 0)), F0)
    with pytest.raises(ValueError):
        aggregate_margin([tx((0, 0, 5))], rx((0, 0, 0)))


def test_zero_interferers():
    rep = aggregate_margin([], rx((0, 0, 0)))
    assert rep.margin == math.inf and rep.compatible and rep.worst_freq is None
    with pytest.raises(ValueError):
        aggregate_margin([tx((10, 0, 0))], rx((0, 0, 0)), freqs=[])


def test_report_invariant():
    with pytest.raises(ValueError):
        CompatReport(-1.0, (), None, True)


def _at_allowance(offset_db, positions):
    """Receiver whose allowance sits ``offset_db`` above the first interferer's level."""
    t0 = tx(positions[0])
    level = received_psd(t0, rx((0, 0, 0)), F0)
    return rx((0, 0, 0), ref=level + offset_db)


def test_boundary_margin_zero():
    r = _at_allowance(0.0, [(30, 40, 0)])
    rep = aggregate_margin([tx((30, 40, 0))], r, [F0])
    assert rep.margin == pytest.approx(0.0, abs=1e-9)
    assert rep.compatible and rep.worst_freq == F0
    # across the band the free-space anchor drifts by 20 log10(f / F0)
    edge = aggregate_margin([tx((30, 40, 0))], r)
    assert edge.margin == pytest.approx(20 * math.log10((F0 - 1e6) / F0), abs=1e-9)


def test_two_interferers_add_3db():
    r = _at_allowance(10 * math.log10(2.0) - 1e-12, [(30, 40, 0)])
    one = aggregate_margin([tx((30, 40, 0))], r).margin
    two = aggregate_margin([tx((30, 40, 0), mid="a"), tx((-40, -30, 0), mid="b")], r)
    assert one - two.margin == pytest.approx(3.0103, abs=0.01)
    assert two.margin == pytest.approx(0.0, abs=0.01)
    assert [pid for pid, _ in two.per_interferer] == ["a", "b"]


def test_matrix_matches_scalar(rng):
    txs = [tx(tuple(rng.uniform(-200, 200, 2)) + (0.0,), pmap=HORN, n=2.8,
              boresight=float(rng.uniform(0, 360))) for _ in range(5)]
    rxs = [rx(tuple(rng.uniform(-200, 200, 2)) + (0.0,), pmap=HORN, n=2.8,
              boresight=float(rng.uniform(0, 360))) for _ in range(4)]
    for f in (F0, F0 + 0.6e6):
        m = received_psd_matrix(txs, rxs, f)
        for i, r in enumerate(rxs):
            for j, t in enumerate(txs):
                assert m[i, j] == pytest.approx(received_psd(t, r, f), abs=1e-9)


def test_bearing_reciprocity():
    a, b = P(3, 7, 0), P(-20, 11, 0)
    assert (bearing(a, b) - bearing(b, a)) % 360 == pytest.approx(180.0)


pos = st.tuples(st.floats(-300, 300), st.floats(-300, 300)).filter(lambda p: math.hypot(*p) > 1.0)


@settings(max_examples=1000)
@given(st.lists(pos, min_size=0, max_size=4), pos, st.floats(0, 360), st.floats(-2e6, 2e6))
def test_adding_interferer_never_raises_margin(existing, new, boresight, df):
    r = rx((0, 0, 0), pmap=HORN, boresight=0.0, n=2.8)
    base = [tx((x, y, 0), pmap=HORN, n=2.8, boresight=boresight) for x, y in existing]
    extra = tx((new[0], new[1], 0), pmap=HORN, n=2.8, bp=BP + [df, 0], boresight=boresight)
    grid = frequency_grid(base + [extra], r)
    before = aggregate_margin(base, r, grid).margin
    after = aggregate_margin(base + [extra], r, grid).margin
    assert after <= before + 1e-9


def test_grid_refinement_stabilizes():
    r = rx((0, 0, 0), ref=-60.0)
    shifted = BP + [0.3e6, 0.0]
    txs = [tx((30, 0, 0), bp=shifted), tx((0, 45, 0), bp=shifted)]
    full = frequency_grid(txs, r)
    m_full = aggregate_margin(txs, r, full).margin
    coarse = aggregate_margin(txs, r, [F0]).margin
    dense = np.union1d(full, np.linspace(full[0], full[-1], 4001))
    m_dense = aggregate_margin(txs, r, dense).margin
    assert coarse >= m_full >= m_dense
    assert m_dense == pytest.approx(m_full, abs=1e-9)
