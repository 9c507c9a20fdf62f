import math
from itertools import combinations

import numpy as np
import pytest

from mmscm import deconflict as dc
from mmscm.compat import aggregate_margin, received_psd
from mmscm.deconflict import (AREA_SIDE, Assignment, Scenario, assign_channels_greedy,
                              chromatic_number, conflict_graph, generate_scenario,
                              interference_matrix, make_link, run_trials, trial_seeds,
                              tx_power_for_coverage, verify_assignment)
from mmscm.ingest import Position3D as P
from mmscm.scm import power_map_from_pattern
from mmscm.synth import horn_pattern

from oracles import chromatic_exhaustive

PMAP = power_map_from_pattern(horn_pattern())


def _scenario(pairs):
    links = tuple(make_link(P(*t, 0), P(*r, 0), i + 1, PMAP) for i, (t, r) in enumerate(pairs))
    return Scenario(2000.0, links, 0)


def test_area_and_power_rule():
    assert AREA_SIDE == pytest.approx(1137.98, abs=0.01)
    assert AREA_SIDE ** 2 == pytest.approx(0.5 * 1609.344 ** 2)
    # boresight level at 100 m lands on the -90 dBm/MHz reference
    sc = _scenario([((0, 0), (0, 100))])
    ln = sc.links[0]
    assert received_psd(ln.tx_scm, ln.rx_scm, 28e9) == pytest.approx(-90.0, abs=1e-9)
    assert tx_power_for_coverage() == pytest.approx(-90.0 + 61.3909 + 56.0, abs=1e-3)


def test_single_link():
    sc = generate_scenario(1, seed=3)
    assert len(sc) == 1
    asg = assign_channels_greedy(sc)
    assert asg.channels == (1,) and asg.channels_used == 1
    assert verify_assignment(sc, asg) == [math.inf]


def test_scenario_invariants():
    for seed in range(3):
        sc = generate_scenario(100, seed=seed)
        txs = np.array([[ln.tx_pos.east, ln.tx_pos.north] for ln in sc.links])
        rxs = np.array([[ln.rx_pos.east, ln.rx_pos.north] for ln in sc.links])
        for i, j in combinations(range(100), 2):
            assert math.dist(txs[i], txs[j]) >= 10.0
        span = np.hypot(*(txs - rxs).T)
        assert np.all((span >= 10.0) & (span <= 100.0))
        for pts in (txs, rxs):
            assert np.all((pts >= 0) & (pts <= AREA_SIDE))


def test_determinism():
    a, b = generate_scenario(30, seed=11), generate_scenario(30, seed=11)
    assert [(ln.tx_pos, ln.rx_pos) for ln in a.links] == [(ln.tx_pos, ln.rx_pos) for ln in b.links]
    assert assign_channels_greedy(a) == assign_channels_greedy(b)
    assert generate_scenario(30, seed=12).links[0].tx_pos != a.links[0].tx_pos


def test_far_apart_links_share_channel():
    sc = _scenario([((0, 0), (0, 50)), ((1500, 1500), (1500, 1550))])
    assert assign_channels_greedy(sc).channels == (1, 1)


def test_engineered_conflict():
    # tx2 sits behind tx1 on the same line and fires through rx1
    sc = _scenario([((0, 0), (60, 0)), ((-20, 0), (40, 0.5))])
    im = interference_matrix(sc)
    assert im[0, 1] > -90.0 and im[1, 0] > -90.0
    asg = assign_channels_greedy(sc)
    assert asg.channels == (1, 2) and asg.channels_used == 2
    assert all(m >= 0 for m in verify_assignment(sc, asg))
    assert conflict_graph(sc)[0, 1]


def test_forcing_same_channel_fails_verification():
    sc = _scenario([((0, 0), (60, 0)), ((-20, 0), (40, 0.5))])
    assert min(verify_assignment(sc, Assignment((1, 1), 1))) < 0


def test_precomputed_matrix_same_result():
    sc = generate_scenario(40, seed=5, area_side=400.0)
    assert assign_channels_greedy(sc) == assign_channels_greedy(sc, interference_matrix(sc))


def test_verify_matches_link_by_link():
    sc = generate_scenario(25, seed=9, area_side=350.0)
    asg = assign_channels_greedy(sc)
    batched = verify_assignment(sc, asg)
    for i, c in enumerate(asg.channels):
        df = (c - 1) * sc.channel_bw
        peers = [dc._tuned(sc.links[j].tx_scm, df) for j, cj in enumerate(asg.channels)
                 if cj == c and j != i]
        want = aggregate_margin(peers, dc._tuned(sc.links[i].rx_scm, df)).margin
        assert batched[i] == pytest.approx(want, abs=1e-9) or batched[i] == want == math.inf


def test_too_dense(monkeypatch):
    monkeypatch.setattr(dc, "MAX_ATTEMPTS", 2000)
    with pytest.raises(RuntimeError, match="too dense"):
        generate_scenario(100, seed=0, area_side=30.0)


def test_bad_inputs():
    with pytest.raises(ValueError):
        generate_scenario(0)
    with pytest.raises(ValueError):
        Assignment((1, 3), 2)


def test_run_trials_single_link():
    s = run_trials(1, 7, seed=1)
    assert s.histogram == {1: 7} and s.mode == 1 and s.max_channels == 1
    assert s.frac_2_3 == 0.0 and s.all_valid is None


def test_trials_use_independent_substreams():
    s = run_trials(15, 4, seed=21, area_side=250.0)
    for ss, count in zip(trial_seeds(21, 4), s.counts):
        sc = generate_scenario(15, np.random.default_rng(ss), area_side=250.0)
        assert assign_channels_greedy(sc).channels_used == count
    assert run_trials(15, 4, seed=21, area_side=250.0).counts == s.counts


def test_chromatic_number_matches_exhaustive(rng):
    for _ in range(40):
        n = int(rng.integers(1, 8))
        upper = rng.random((n, n)) < rng.uniform(0.1, 0.8)
        adj = np.triu(upper, 1)
        adj = adj | adj.T
        assert chromatic_number(adj) == chromatic_exhaustive(adj.tolist())
    assert chromatic_number(np.zeros((0, 0), bool)) == 0
    k4 = ~np.eye(4, dtype=bool)
    assert chromatic_number(k4) == 4


def test_greedy_respects_pairwise_bound():
    for seed in range(10):
        sc = generate_scenario(8, seed=seed, area_side=200.0)
        asg = assign_channels_greedy(sc)
        bound = chromatic_number(conflict_graph(sc))
        assert bound <= asg.channels_used
