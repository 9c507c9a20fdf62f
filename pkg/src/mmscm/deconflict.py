"""Monte Carlo link layouts and greedy channel deconfliction.

Every link is a boresight-aligned Tx-Rx pair of horn antennas. Tx power is
set so the boresight PSD received at the coverage radius equals the Rx
allowance, which makes conflicts independent of the absolute power scale.
Channels are 1 MHz wide, numbered from 1, and only co-channel interference
is considered when placing a link.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import combinations

import numpy as np

from .compat import (allowed_psd, coupling_matrix, emission_spectrum, frequency_grid,
                     path_loss_between, received_psd_matrix)
from .geometry import bearing
from .ingest import AntennaPattern, Position3D
from .scm import (PowerMap, PropagationMap, Schedule, ScmLocation, SpectrumMask,
                  UnderlayMask, build_rx_scm, build_tx_scm, power_map_from_pattern,
                  trapezoid_breakpoints)

MILE = 1609.344
AREA_SIDE = math.sqrt(0.5) * MILE
MIN_TX_SEPARATION = 10.0
LINK_RANGE = (10.0, 100.0)
COVERAGE_RADIUS = 100.0
EXPONENT = 2.8
BASE_FREQ = 28e9
CHANNEL_BW = 1e6
RX_REFERENCE_DBM = -90.0
MAX_ATTEMPTS = 1_000_000

_SCHEDULE = Schedule(datetime(2024, 1, 1, tzinfo=timezone.utc),
                     datetime(2024, 1, 2, tzinfo=timezone.utc))


@dataclass(frozen=True)
class Link:
    tx_pos: Position3D
    rx_pos: Position3D
    tx_scm: object
    rx_scm: object


@dataclass(frozen=True)
class Scenario:
    area_side: float
    links: tuple
    seed: int
    channel_bw: float = CHANNEL_BW
    base_freq: float = BASE_FREQ

    def __len__(self):
        return len(self.links)


@dataclass(frozen=True)
class Assignment:
    channels: tuple
    channels_used: int
    place_times: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.channels and self.channels_used != max(self.channels):
            raise ValueError("channels_used must equal the highest channel index")


def channel_center(k: int, base_freq=BASE_FREQ, channel_bw=CHANNEL_BW) -> float:
    return base_freq + (k - 1) * channel_bw


def default_masks(center: float, channel_bw=CHANNEL_BW):
    """Trapezoid spectrum and underlay masks for one channel.

    0 dB across the channel, linear skirts to -40 dB over half a channel on
    each side.
    """
    bp = trapezoid_breakpoints(center, channel_bw, channel_bw / 2.0, -40.0)
    return SpectrumMask(bp), UnderlayMask(bp)


def tx_power_for_coverage(rx_ref: float = RX_REFERENCE_DBM, radius: float = COVERAGE_RADIUS,
                          exponent: float = EXPONENT, f: float = BASE_FREQ) -> float:
    return rx_ref + path_loss_between(PropagationMap.uniform(exponent), 0.0, radius, f)


def _rx_in_square(rng, tx, side):
    while True:
        r = rng.uniform(*LINK_RANGE)
        th = rng.uniform(0.0, 2.0 * math.pi)
        e, n = tx[0] + r * math.sin(th), tx[1] + r * math.cos(th)
        if 0.0 <= e <= side and 0.0 <= n <= side:
            return e, n


def _place_txs(rng, n_links, side, min_sep):
    pts = np.empty((n_links, 2))
    k = 0
    attempts = 0
    while k < n_links:
        attempts += 1
        if attempts > MAX_ATTEMPTS:
            raise RuntimeError("Tx rejection sampling exceeded 1e6 attempts; area too dense")
        p = rng.uniform(0.0, side, 2)
        if k and np.min(np.hypot(*(pts[:k] - p).T)) < min_sep:
            continue
        pts[k] = p
        k += 1
    return pts


def make_link(tx_pos: Position3D, rx_pos: Position3D, index: int, pmap: PowerMap, *,
              exponent: float = EXPONENT, channel_bw=CHANNEL_BW, base_freq=BASE_FREQ,
              rx_ref=RX_REFERENCE_DBM) -> Link:
    """Boresight-aligned Tx/Rx pair on channel 1 with the coverage-radius power rule."""
    prop = PropagationMap.uniform(exponent)
    mask, underlay = default_masks(channel_center(1, base_freq, channel_bw), channel_bw)
    p_tx = tx_power_for_coverage(rx_ref, COVERAGE_RADIUS, exponent, base_freq)
    tx_scm = build_tx_scm(p_tx, mask, pmap, prop, _SCHEDULE, ScmLocation.point(tx_pos),
                          boresight_az=bearing(tx_pos, rx_pos), model_id=f"tx-{index:04d}")
    rx_scm = build_rx_scm(rx_ref, underlay, pmap, prop, _SCHEDULE, ScmLocation.point(rx_pos),
                          boresight_az=bearing(rx_pos, tx_pos), model_id=f"rx-{index:04d}")
    return Link(tx_pos, rx_pos, tx_scm, rx_scm)


def generate_scenario(n_links: int, seed=0, *, area_side=AREA_SIDE,
                      pattern: AntennaPattern | PowerMap | None = None,
                      exponent: float = EXPONENT, channel_bw=CHANNEL_BW,
                      base_freq=BASE_FREQ, rx_ref=RX_REFERENCE_DBM) -> Scenario:
    if n_links < 1:
        raise ValueError("n_links must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if pattern is None:
        from .synth import horn_pattern
        pattern = horn_pattern()
    pmap = pattern if isinstance(pattern, PowerMap) else power_map_from_pattern(pattern)
    txs = _place_txs(rng, n_links, area_side, MIN_TX_SEPARATION)
    links = []
    for i, (te, tn) in enumerate(txs):
        re_, rn = _rx_in_square(rng, (te, tn), area_side)
        links.append(make_link(Position3D(te, tn, 0.0), Position3D(re_, rn, 0.0), i + 1, pmap,
                               exponent=exponent, channel_bw=channel_bw,
                               base_freq=base_freq, rx_ref=rx_ref))
    seed_val = seed if isinstance(seed, (int, np.integer)) else -1
    return Scenario(area_side, tuple(links), int(seed_val), channel_bw, base_freq)


def interference_matrix(sc: Scenario) -> np.ndarray:
    """``I[i, j]`` = co-channel PSD (dBm/MHz) from Tx j at Rx i; own link excluded.

    All links share one mask shape, so co-channel margins reduce to the
    channel-centre value and one matrix serves every channel.
    """
    txs = [ln.tx_scm for ln in sc.links]
    rxs = [ln.rx_scm for ln in sc.links]
    m = received_psd_matrix(txs, rxs, channel_center(1, sc.base_freq, sc.channel_bw))
    np.fill_diagonal(m, -np.inf)
    return m


def _mw(dbm):
    with np.errstate(over="ignore"):
        return np.power(10.0, np.asarray(dbm) / 10.0)


def assign_channels_greedy(sc: Scenario, interference=None) -> Assignment:
    """Place links in creation order on the lowest channel that stays compatible.

    Without a precomputed ``interference`` matrix each link's interference
    terms against the already-placed links are computed when it is placed,
    so ``place_times`` covers the full incremental cost.
    """
    n = len(sc.links)
    f0 = channel_center(1, sc.base_freq, sc.channel_bw)
    allow = _mw(np.array([ln.rx_scm.reference_power for ln in sc.links]))
    full = None if interference is None else _mw(interference)
    channel = np.zeros(n, int)
    # agg[i] = co-channel interference (mW/MHz) currently seen by placed Rx i
    agg = np.zeros(n)
    times = []
    for k in range(n):
        t0 = time.perf_counter()
        if full is not None:
            into_k, from_k = full[k, :k], full[:k, k]
        elif k:
            link = sc.links[k]
            into_k = _mw(received_psd_matrix([ln.tx_scm for ln in sc.links[:k]],
                                             [link.rx_scm], f0)[0])
            from_k = _mw(received_psd_matrix([link.tx_scm],
                                             [ln.rx_scm for ln in sc.links[:k]], f0)[:, 0])
        else:
            into_k = from_k = np.zeros(0)
        c = 1
        while True:
            peers = np.flatnonzero(channel[:k] == c)
            own = into_k[peers].sum()
            if own <= allow[k] and np.all(agg[peers] + from_k[peers] <= allow[peers]):
                break
            c += 1
        channel[k] = c
        agg[k] = own
        agg[peers] += from_k[peers]
        times.append(time.perf_counter() - t0)
    return Assignment(tuple(int(x) for x in channel), int(channel.max()), tuple(times))


def verify_assignment(sc: Scenario, asg: Assignment) -> list:
    """Recheck every Rx against its co-channel Txs with the full SCM computation.

    Returns the per-link margins (dB); +inf when no co-channel interferer.
    Receivers sharing a channel are evaluated together; the result matches
    ``aggregate_margin`` run link by link.
    """
    margins = [math.inf] * len(sc.links)
    by_channel = {}
    for i, c in enumerate(asg.channels):
        by_channel.setdefault(c, []).append(i)
    for c, idx in by_channel.items():
        if len(idx) < 2:
            continue
        df = (c - 1) * sc.channel_bw
        txs = [_tuned(sc.links[j].tx_scm, df) for j in idx]
        rxs = [_tuned(sc.links[j].rx_scm, df) for j in idx]
        freqs = frequency_grid(txs, rxs[0])
        static = coupling_matrix(txs, rxs)
        np.fill_diagonal(static, -math.inf)
        emit = emission_spectrum(txs, freqs)
        worst = np.full(len(idx), math.inf)
        for k, f in enumerate(freqs):
            with np.errstate(divide="ignore"):
                agg = 10.0 * np.log10(_mw(static + emit[:, k][None, :]).sum(axis=1))
            allowed = np.array([allowed_psd(r, f) for r in rxs])
            m = np.full(len(idx), math.inf)
            hit = agg > -math.inf
            with np.errstate(invalid="ignore"):
                m[hit] = allowed[hit] - agg[hit]
            m[hit & (allowed == -math.inf)] = -math.inf
            worst = np.minimum(worst, m)
        for k, i in enumerate(idx):
            margins[i] = float(worst[k])
    return margins


def _tuned(model, df):
    """Copy of an SCM with its mask moved by ``df`` Hz."""
    from dataclasses import replace

    if df == 0:
        return model
    if model.kind == "transmitter":
        return replace(model, spectrum_mask=model.spectrum_mask.shifted(df))
    return replace(model, underlay_mask=model.underlay_mask.shifted(df))


def conflict_graph(sc: Scenario, interference=None) -> np.ndarray:
    """Pairs of links that cannot share a channel even without other links."""
    lin = _mw(interference_matrix(sc) if interference is None else interference)
    allow = _mw(np.array([ln.rx_scm.reference_power for ln in sc.links]))
    bad = lin > allow[:, None]
    return bad | bad.T


def chromatic_number(adj: np.ndarray) -> int:
    """Exact chromatic number by brute force; intended for small graphs."""
    n = len(adj)
    if n == 0:
        return 0
    edges = [(i, j) for i, j in combinations(range(n), 2) if adj[i, j]]
    if not edges:
        return 1
    for k in range(2, n + 1):
        colors = [-1] * n

        def place(v, used):
            if v == n:
                return True
            # symmetry breaking: a new colour may only be the next unused one
            for c in range(min(used + 1, k)):
                if all(colors[u] != c for u in range(v) if adj[u, v]):
                    colors[v] = c
                    if place(v + 1, max(used, c + 1)):
                        return True
            colors[v] = -1
            return False

        if place(0, 0):
            return k
    return n


@dataclass(frozen=True)
class TrialSummary:
    n_links: int
    n_trials: int
    counts: tuple
    histogram: dict
    mode: int
    frac_2_3: float
    max_channels: int
    max_place_time: float
    all_valid: bool | None = None


def trial_seeds(seed, n_trials):
    return np.random.SeedSequence(seed).spawn(n_trials)


def run_trials(n_links: int, n_trials: int, seed=0, *, verify: bool = False,
               **scenario_kw) -> TrialSummary:
    """Channels needed over independent trials; trial i uses substream i of ``seed``."""
    counts = []
    worst_time = 0.0
    valid = True
    for ss in trial_seeds(seed, n_trials):
        sc = generate_scenario(n_links, np.random.default_rng(ss), **scenario_kw)
        asg = assign_channels_greedy(sc)
        counts.append(asg.channels_used)
        if asg.place_times:
            worst_time = max(worst_time, max(asg.place_times))
        if verify:
            valid &= all(m >= -1e-9 for m in verify_assignment(sc, asg))
    hist = dict(sorted(Counter(counts).items()))
    mode = max(hist, key=lambda k: (hist[k], -k))
    frac = sum(v for k, v in hist.items() if k in (2, 3)) / n_trials
    return TrialSummary(n_links, n_trials, tuple(counts), hist, mode, frac,
                        max(counts), worst_time, valid if verify else None)
