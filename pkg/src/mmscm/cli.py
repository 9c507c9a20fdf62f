"""``mmscm`` command-line entry point.

Inputs that take measurement files also accept ``synth:NAME`` to run on the
bundled generator's recreation of a published sidewalk (seeded by
``--seed``). Tables go to stdout or ``--out`` as comma-separated text with
six significant digits; ``--figure PATH`` additionally renders a plot.

Site configs are JSON documents tagged ``"schema": "site/1"``::

    {"schema": "site/1", "site": "Int", "rx_position": [0, 0, 15],
     "sidewalks": {"Int-N-E": {"sector": [100, 140], "data": "synth:Int-N-E",
                               "facades": [[[e, n, u], [e, n, u]]],
                               "corners": [[e, n, u]]}},
     "budget": {"tx_power": 28.0}}

Relative ``data`` paths resolve against the config file's directory.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .compat import aggregate_margin
from .coverage import LinkBudget, noise_floor, shannon_rate, snr_profile, summarize
from .deconflict import AREA_SIDE, CHANNEL_BW, run_trials
from .geometry import CornerPoint, FacadeLine, angular_deviation, aoi_direct, aoi_reflection
from .ingest import (AntennaPattern, ParseError, Position3D, parse_antenna_pattern,
                     parse_antenna_text, parse_measurement_file, serialize_dataset,
                     unique_ids, validate_dataset)
from .metrics import abg_cdf, dataset_metrics, spectrum_stack_grid
from .pathloss import (PathGainFit, eval_fit, fit_single_slope, fspl, group_fit,
                       umi_los, umi_nlos)
from .scm import (PropagationMap, Schedule, SchemaError, ScmLocation, SpectrumMask,
                  UnderlayMask, build_rx_scm, build_tx_scm, propagation_map_from_fits,
                  read_scm, serialize_scm, trapezoid_breakpoints)

SITE_SCHEMA = "site/1"
SYNTH_PREFIX = "synth:"


class CliError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.6g" % x
    return str(x)


def _row(*vals) -> str:
    return ",".join(fmt(v) for v in vals)


class _Out:
    """Collects lines and writes them once, to a file or stdout."""

    def __init__(self, path=None):
        self.path = path
        self.lines = []

    def __call__(self, *vals):
        self.lines.append(_row(*vals))

    def raw(self, line):
        self.lines.append(line)

    def flush(self):
        text = "\n".join(self.lines) + "\n" if self.lines else ""
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


# ------------------------------------------------------------------ site config

@dataclass(frozen=True)
class SidewalkConfig:
    name: str
    sector: tuple | None = None
    data: str | None = None
    facades: tuple = ()
    corners: tuple = ()


@dataclass(frozen=True)
class SiteConfig:
    site: str
    rx_position: Position3D
    sidewalks: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def link_budget(self, **overrides) -> LinkBudget:
        kw = dict(self.budget)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return LinkBudget(**kw)


def _pos(v, where):
    try:
        if len(v) != 3:
            raise ValueError
        return Position3D(*(float(x) for x in v))
    except (TypeError, ValueError):
        raise CliError(f"{where}: expected [east, north, up]") from None


def load_site_config(path) -> SiteConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("schema") != SITE_SCHEMA:
        raise CliError(f"{path}: expected \"schema\": \"{SITE_SCHEMA}\"")
    base = path.parent
    budget_keys = {f.name for f in fields(LinkBudget)}
    budget = doc.get("budget", {})
    bad = sorted(set(budget) - budget_keys)
    if bad:
        raise CliError(f"{path}: unknown budget keys {bad}")
    sidewalks = {}
    for name, sw in doc.get("sidewalks", {}).items():
        where = f"{path}: sidewalks.{name}"
        sector = sw.get("sector")
        if sector is not None:
            if len(sector) != 2 or not all(0.0 <= float(s) < 360.0 for s in sector):
                raise CliError(f"{where}.sector must be two bearings in [0, 360)")
            sector = (float(sector[0]), float(sector[1]))
        data = sw.get("data")
        if data is not None and not data.startswith(SYNTH_PREFIX):
            if not (base / data).exists():
                raise CliError(f"{where}.data: file {data!r} not found")
            data = str(base / data)
        facades = tuple(FacadeLine(_pos(a, f"{where}.facades"), _pos(b, f"{where}.facades"))
                        for a, b in sw.get("facades", []))
        corners = tuple(CornerPoint(_pos(c, f"{where}.corners")) for c in sw.get("corners", []))
        sidewalks[name] = SidewalkConfig(name, sector, data, facades, corners)
    return SiteConfig(str(doc.get("site", "")), _pos(doc.get("rx_position"), f"{path}: rx_position"),
                      sidewalks, dict(budget), base)


# ---------------------------------------------------------------------- loading

def load_dataset(src: str, seed: int = 0):
    if src.startswith(SYNTH_PREFIX):
        from .synth import SIDEWALKS, synth_dataset

        name = src[len(SYNTH_PREFIX):]
        if name not in SIDEWALKS:
            raise CliError(f"unknown synthetic sidewalk {name!r}")
        return synth_dataset(name, seed)
    return parse_measurement_file(src)


def load_datasets(srcs, seed=0):
    out = [load_dataset(s, seed) for s in srcs]
    unique_ids(out)
    return out


def bundled_pattern_text() -> str:
    return resources.files("mmscm").joinpath("data/horn_24dbi.pat").read_text()


def load_pattern(spec) -> AntennaPattern | None:
    if spec is None or spec == "none":
        return None
    if spec == "default":
        return parse_antenna_text(bundled_pattern_text(), path="<bundled horn>")
    if spec == "isotropic":
        return AntennaPattern.isotropic()
    return parse_antenna_pattern(spec)


def _points(ms):
    return np.array([[m.distance, m.path_gain] for m in ms])


# ------------------------------------------------------------------ subcommands

def cmd_synth(a):
    from .synth import SIDEWALKS, synth_dataset

    out = _Out(a.out)
    if a.list:
        out("sidewalk", "length_m", "links", "n", "b_db", "sigma_db", "median_abg_dbi",
            "p10_abg_dbi", "cw_angle_deg", "visual_los", "condition")
        for r in SIDEWALKS.values():
            out(r.name, r.length, r.links, r.slope_n, r.intercept_b, r.rms_sigma,
                r.median_abg, r.p10_abg, r.cw_angle, r.visual_los, r.condition)
        out.flush()
        return 0
    if not a.name:
        raise CliError("synth needs a sidewalk name (or --list)")
    if a.name not in SIDEWALKS:
        raise CliError(f"unknown synthetic sidewalk {a.name!r}")
    ds = synth_dataset(a.name, a.seed, n_links=a.links, samples_per_scan=a.samples_per_scan,
                       scans=a.scans)
    out.raw(serialize_dataset(ds).rstrip("\n"))
    out.flush()
    return 0


def cmd_ingest(a):
    datasets = load_datasets(a.inputs, a.seed)
    if a.canonical:
        if len(datasets) != 1:
            raise CliError("--canonical takes exactly one input")
        Path(a.canonical).write_text(serialize_dataset(datasets[0]))
    out = _Out(a.out)
    out("sidewalk", "condition", "visual_los", "links", "d_min_m", "d_max_m", "tx_power_dbm")
    for ds in datasets:
        d = ds.distances
        out(ds.sidewalk_id, ds.condition, ds.visual_los, len(ds),
            float(d.min()) if len(d) else None, float(d.max()) if len(d) else None, ds.tx_power)
    out.flush()
    return 0


def cmd_validate(a):
    pattern = load_pattern(a.pattern)
    out = _Out(a.out)
    out("sidewalk", "link_id", "warning")
    n = 0
    for ds in load_datasets(a.inputs, a.seed):
        rep = validate_dataset(ds, pattern)
        for link_id, msg in rep.warnings:
            out(ds.sidewalk_id, link_id, msg)
        n += len(rep)
    out.flush()
    return 1 if (a.strict and n) else 0


def cmd_metrics(a):
    pattern = load_pattern(a.pattern)
    site = load_site_config(a.config) if a.config else None
    out = _Out(a.out)
    header = ["sidewalk", "link_id", "distance_m", "path_gain_db", "abg_dbi", "aoa_deg", "k_db"]
    if site:
        header += ["dev_direct_deg", "dev_reflect_deg"]
    out(*header)
    cdf = {}
    for ds in load_datasets(a.inputs, a.seed):
        ms = dataset_metrics(ds, pattern, a.bin_width, a.window)
        cdf[ds.sidewalk_id] = [m.azimuth_gain for m in ms]
        sw = site.sidewalks.get(ds.sidewalk_id) if site else None
        for rec, m in zip(ds.records, ms):
            row = [ds.sidewalk_id, m.link_id, m.distance, m.path_gain, m.azimuth_gain, m.aoa, m.k_factor]
            if site:
                dd = angular_deviation(m.aoa, aoi_direct(rec.tx_pos, rec.rx_pos))
                dr = None
                if sw and sw.facades:
                    try:
                        dr = angular_deviation(m.aoa, aoi_reflection(rec.tx_pos, rec.rx_pos,
                                                                     sw.facades[0]))
                    except ValueError:
                        dr = None
                row += [dd, dr]
            out(*row)
    out.flush()
    if a.figure:
        from .plotting import plot_abg_cdf
        plot_abg_cdf(cdf, a.figure)
    return 0


def _fit_rows(datasets, pattern):
    """(dataset, points, fit, ABG values) per dataset."""
    rows = []
    for ds in datasets:
        ms = dataset_metrics(ds, pattern)
        pts = _points(ms)
        rows.append((ds, pts, fit_single_slope(pts, ds.sidewalk_id),
                     np.array([m.azimuth_gain for m in ms])))
    return rows


def _abg_stats(abg):
    cdf = abg_cdf(abg)
    return cdf.median, cdf.quantile(0.1)


def cmd_fit(a):
    pattern = load_pattern(a.pattern)
    rows = _fit_rows(load_datasets(a.inputs, a.seed), pattern)
    out = _Out(a.out)
    out("label", "span_m", "links", "n", "b_db", "sigma_db", "median_abg_dbi",
        "p10_abg_dbi", "d_min_m", "d_max_m")
    series = []
    for ds, pts, fit, abg in rows:
        if a.exclude_positive and fit.slope_n > 0:
            continue
        out(fit.label, fit.d_max - fit.d_min, fit.count, fit.slope_n, fit.intercept_b,
            fit.rms_sigma, *_abg_stats(abg), fit.d_min, fit.d_max)
        series.append((fit.label, pts, fit))
    if a.pooled:
        pooled = group_fit([(r[0], r[1]) for r in rows], label=a.pooled)
        out(pooled.label, pooled.d_max - pooled.d_min, pooled.count, pooled.slope_n,
            pooled.intercept_b, pooled.rms_sigma,
            *_abg_stats(np.concatenate([r[3] for r in rows])), pooled.d_min, pooled.d_max)
    out.flush()
    if a.figure:
        from .plotting import plot_fits
        plot_fits(series, a.figure)
    return 0


def _reference_curve(model, d3d, h_bs, h_ut, f):
    if model == "fspl":
        return fspl(d3d, f)
    fn = umi_los if model == "umi-los" else umi_nlos
    return fn(d3d, h_bs, h_ut, f)


def cmd_compare(a):
    pattern = load_pattern(a.pattern)
    rows = _fit_rows(load_datasets(a.inputs, a.seed), pattern)
    fit = group_fit([(r[0], r[1]) for r in rows], label=a.label)
    # smallest 3D distance with a 2D distance of at least 10 m
    d_lo = max(math.ceil(fit.d_min), math.ceil(math.hypot(10.0, a.h_bs - a.h_ut)))
    d = np.arange(d_lo, fit.d_max + 1e-9, a.step, dtype=float)
    if len(d) == 0:
        raise CliError("fit range is too short to compare")
    ref = np.asarray(_reference_curve(a.model, d, a.h_bs, a.h_ut, a.freq), dtype=float)
    pg = eval_fit(fit, d)
    delta = pg - ref
    out = _Out(a.out)
    out.raw(f"# fit {fit.label}: n={fmt(fit.slope_n)} b={fmt(fit.intercept_b)} "
            f"sigma={fmt(fit.rms_sigma)} count={fit.count}")
    out.raw(f"# reference {a.model}: h_bs={fmt(a.h_bs)} h_ut={fmt(a.h_ut)} f={fmt(a.freq)}")
    out.raw(f"# mean_delta_db={fmt(float(delta.mean()))}")
    out("distance_m", "fit_pg_db", "reference_pg_db", "delta_db")
    for row in zip(d, pg, ref, delta):
        out(*(float(v) for v in row))
    out.flush()
    if a.figure:
        from .plotting import plot_comparison
        plot_comparison(d, {fit.label: pg, a.model: ref}, a.figure)
    return 0


def _coverage_source(a):
    from .synth import SIDEWALKS, SITE_HEIGHTS

    if a.row:
        if a.row not in SIDEWALKS:
            raise CliError(f"unknown sidewalk row {a.row!r}")
        r = SIDEWALKS[a.row]
        d_lo = max(SITE_HEIGHTS[a.row.split("-")[0]] + 5.0, 10.0)
        return PathGainFit(r.slope_n, r.intercept_b, r.rms_sigma, d_lo, float(r.length),
                           r.links, r.name), r.median_abg
    if a.fit:
        try:
            n, b = (float(x) for x in a.fit.split(","))
            lo, hi = (float(x) for x in a.range.split(","))
        except (ValueError, AttributeError):
            raise CliError("--fit needs 'n,b' and --range 'd_min,d_max'") from None
        return PathGainFit(n, b, 0.0, lo, hi, 2, a.label or "fit"), None
    if not a.inputs:
        raise CliError("coverage needs inputs, --row or --fit")
    pattern = load_pattern(a.pattern)
    rows = _fit_rows(load_datasets(a.inputs, a.seed), pattern)
    fit = group_fit([(r[0], r[1]) for r in rows], label=a.label or rows[0][0].sidewalk_id)
    return fit, _abg_stats(np.concatenate([r[3] for r in rows]))[0]


def cmd_coverage(a):
    site = load_site_config(a.config) if a.config else None
    fit, median_abg = _coverage_source(a)
    over = dict(tx_power=a.tx_power, tx_max_gain=a.tx_gain, rx_gain=a.rx_gain,
                noise_figure=a.noise_figure, bandwidth=a.bandwidth, snr_cutoff=a.snr_cutoff,
                nominal_azimuth_gain=a.nominal_gain,
                median_abg=a.median_abg if a.median_abg is not None else median_abg)
    budget = site.link_budget(**over) if site else LinkBudget(
        **{k: v for k, v in over.items() if v is not None})
    s = summarize(fit, budget, a.step)
    prof = snr_profile(fit, budget, a.step)
    out = _Out(a.out)
    out.raw("# G_Tx = tx_max_gain - (nominal_azimuth_gain - median_abg); "
            "cutoff_no_degradation_m uses G_Tx = tx_max_gain")
    out.raw("# cutoff 'none' = SNR stays above the threshold over the whole fit range")
    out("key", "value")
    for k, v in (("label", s.label), ("n", fit.slope_n), ("b_db", fit.intercept_b),
                 ("d_min_m", float(prof.distances[0])), ("d_max_m", float(prof.distances[-1])),
                 ("noise_floor_dbm", noise_floor(budget)), ("median_abg_dbi", budget.median_abg),
                 ("effective_tx_gain_dbi", s.effective_tx_gain), ("snr_min_db", s.snr_min),
                 ("snr_max_db", s.snr_max), ("snr_cutoff_db", budget.snr_cutoff),
                 ("cutoff_m", s.cutoff), ("cutoff_no_degradation_m", s.cutoff_no_degradation),
                 ("rate_at_cutoff_snr_bps", float(shannon_rate(budget.snr_cutoff, budget.bandwidth)))):
        out(k, v)
    out.flush()
    if a.profile_out:
        p = _Out(a.profile_out)
        p("distance_m", "snr_db", "rate_bps")
        rate = shannon_rate(prof.snr, budget.bandwidth)
        for d, snr, r in zip(prof.distances, prof.snr, rate):
            p(float(d), float(snr), float(r) if snr >= budget.snr_cutoff else 0.0)
        p.flush()
    if a.figure:
        from .plotting import plot_snr
        plot_snr([prof], budget.snr_cutoff, a.figure)
    return 0


def _sector_fits(site, seed, pattern):
    fits = []
    for sw in site.sidewalks.values():
        if sw.sector is None or sw.data is None:
            continue
        ds = load_dataset(sw.data, seed)
        fits.append((sw.sector, fit_single_slope(_points(dataset_metrics(ds, pattern)), sw.name)))
    return fits


def _iso(s):
    try:
        t = datetime.fromisoformat(s)
    except ValueError:
        raise CliError(f"bad ISO timestamp {s!r}") from None
    return t if t.tzinfo else t.replace(tzinfo=timezone.utc)


def cmd_scm_gen(a):
    site = load_site_config(a.config) if a.config else None
    pattern = load_pattern(a.pattern) or AntennaPattern.isotropic()
    if a.position:
        pos = Position3D.parse(a.position)
    elif site:
        pos = site.rx_position
    else:
        raise CliError("scm-gen needs --position or --config")
    if site and a.exponent is None:
        fits = _sector_fits(site, a.seed, None)
        prop = propagation_map_from_fits(fits, a.resolution) if fits else PropagationMap.uniform(
            2.0, a.resolution)
    else:
        prop = PropagationMap.uniform(2.0 if a.exponent is None else a.exponent, a.resolution)
    bp = trapezoid_breakpoints(a.center_freq, a.channel_bw, a.channel_bw / 2.0, -40.0)
    sched = Schedule(_iso(a.start), _iso(a.end))
    loc = ScmLocation.point(pos)
    kw = dict(boresight_az=a.boresight, resolution=a.resolution, model_id=a.id)
    if a.kind == "tx":
        m = build_tx_scm(a.power, SpectrumMask(bp), pattern, prop, sched, loc, **kw)
    else:
        m = build_rx_scm(a.power, UnderlayMask(bp), pattern, prop, sched, loc, **kw)
    data = serialize_scm(m)
    Path(a.output).write_bytes(data)
    out = _Out(a.out)
    out("id", "kind", "bytes", "measured_cells")
    out(m.model_id, m.kind, len(data), int(np.sum(prop.measured)))
    out.flush()
    return 0


def cmd_compat(a):
    rx = read_scm(a.rx)
    txs = [read_scm(p) for p in a.tx]
    if rx.kind != "receiver" or any(t.kind != "transmitter" for t in txs):
        raise CliError("--rx must be a receiver model and --tx transmitter models")
    rep = aggregate_margin(txs, rx)
    out = _Out(a.out)
    out.raw(f"# margin_db={fmt(rep.margin)} worst_freq_hz={fmt(rep.worst_freq)} "
            f"compatible={fmt(rep.compatible)}")
    out("tx_id", "peak_psd_dbm_per_mhz")
    for tid, lv in rep.per_interferer:
        out(tid, lv)
    out.flush()
    return 0


def cmd_simulate(a):
    kw = {"area_side": a.area, "channel_bw": a.channel_bw}
    if a.pattern:
        kw["pattern"] = load_pattern(a.pattern)
    s = run_trials(a.links, a.trials, a.seed, verify=a.verify, **kw)
    out = _Out(a.out)
    out.raw(f"# links={a.links} trials={a.trials} seed={a.seed} area_side_m={fmt(a.area)}")
    out.raw(f"# mode={s.mode} frac_2_3={fmt(s.frac_2_3)} max={s.max_channels}"
            + (f" all_valid={fmt(s.all_valid)}" if a.verify else ""))
    out("channels", "trials", "fraction")
    for k, v in s.histogram.items():
        out(k, v, v / a.trials)
    out.flush()
    if a.summary_json:
        doc = {"links": a.links, "trials": a.trials, "seed": a.seed,
               "histogram": {str(k): v for k, v in s.histogram.items()},
               "counts": list(s.counts), "mode": s.mode, "frac_2_3": s.frac_2_3,
               "max_channels": s.max_channels, "all_valid": s.all_valid}
        Path(a.summary_json).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    if a.timing:
        print(f"max per-link placement time: {s.max_place_time:.4f} s", file=sys.stderr)
    if a.figure:
        from .plotting import plot_histogram
        plot_histogram(s.histogram, a.links, a.figure)
    return 0


def cmd_stack(a):
    ds = load_dataset(a.input, a.seed)
    grid = spectrum_stack_grid(ds, a.bin_width)
    out = _Out(a.out)
    out.raw(grid.to_text().rstrip("\n"))
    out.flush()
    if a.figure:
        from .plotting import plot_stack
        plot_stack(grid, a.figure)
    return 0


# ----------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmscm", description=(
        "Process rotating-horn 28 GHz sidewalk measurements, fit path gain, "
        "build spectrum consumption models and simulate channel deconfliction."))
    p.add_argument("--version", action="version", version=f"mmscm {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", "-o", help="write the table here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="seed for synth: inputs (default 0)")

    def inputs(sp, nargs="+"):
        sp.add_argument("inputs", nargs=nargs, metavar="INPUT",
                        help="measurement file (mms/1) or synth:NAME")

    def pattern(sp, default="default"):
        sp.add_argument("--pattern", default=default,
                        help="antenna pattern file, 'default' (bundled horn), 'isotropic' or 'none'")

    def figure(sp):
        sp.add_argument("--figure", metavar="PATH", help="also render a figure (png/pdf/svg)")

    sp = sub.add_parser("synth", parents=[common], help="write a synthetic sidewalk dataset",
                        description="Regenerate a sidewalk from its published summary row.")
    sp.add_argument("name", nargs="?", help="sidewalk name, e.g. Int-N-E")
    sp.add_argument("--list", action="store_true", help="list the available rows")
    sp.add_argument("--links", type=int, help="override the number of links")
    sp.add_argument("--samples-per-scan", type=int, default=400)
    sp.add_argument("--scans", type=int, default=40)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("ingest", parents=[common], help="parse datasets and summarize them",
                        description="Parse measurement files; print one summary row each.")
    inputs(sp)
    sp.add_argument("--canonical", metavar="PATH", help="rewrite the single input canonically")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("validate", parents=[common], help="plausibility warnings",
                        description="List per-link warnings (sample counts, sounder range...).")
    inputs(sp)
    pattern(sp)
    sp.add_argument("--strict", action="store_true", help="exit 1 when any warning is raised")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("metrics", parents=[common], help="per-link path gain, ABG, AoA, K",
                        description="Per-link metrics from the time-averaged angular spectrum.")
    inputs(sp)
    pattern(sp)
    sp.add_argument("--bin-width", type=float, default=1.0, help="PAS bin width (deg)")
    sp.add_argument("--window", type=float, default=10.0, help="K-factor window around AoA (deg)")
    sp.add_argument("--config", help="site/1 config; adds AoA deviation columns")
    figure(sp)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("fit", parents=[common], help="single-slope path gain fits",
                        description="Least-squares fit pg = b + 10 n log10(d) per dataset.")
    inputs(sp)
    pattern(sp)
    sp.add_argument("--pooled", metavar="LABEL", help="add a pooled fit over all inputs")
    sp.add_argument("--exclude-positive", action="store_true",
                    help="drop per-dataset rows with a positive slope")
    figure(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("compare", parents=[common], help="pooled fit against a reference model",
                        description="Compare the pooled fit of the inputs with FSPL or 38.901 UMi.")
    inputs(sp)
    pattern(sp)
    sp.add_argument("--model", choices=("umi-nlos", "umi-los", "fspl"), default="umi-nlos")
    sp.add_argument("--h-bs", type=float, default=15.0, help="BS height (m)")
    sp.add_argument("--h-ut", type=float, default=1.5, help="UT height (m)")
    sp.add_argument("--freq", type=float, default=28e9, help="carrier (Hz)")
    sp.add_argument("--step", type=float, default=10.0, help="distance step (m)")
    sp.add_argument("--label", default="pooled")
    figure(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("coverage", parents=[common], help="SNR profile and 15 dB cutoff",
                        description="Median SNR along a sidewalk from a path gain fit.")
    inputs(sp, nargs="*")
    pattern(sp)
    sp.add_argument("--row", help="use a published sidewalk row, e.g. Int-S-W")
    sp.add_argument("--fit", help="explicit fit 'n,b' (needs --range)")
    sp.add_argument("--range", help="fit distance range 'd_min,d_max' (m)")
    sp.add_argument("--label")
    sp.add_argument("--config", help="site/1 config with budget overrides")
    for flag, help_ in (("--tx-power", "dBm"), ("--tx-gain", "max Tx gain, dBi"),
                        ("--rx-gain", "dBi"), ("--noise-figure", "dB"), ("--bandwidth", "Hz"),
                        ("--snr-cutoff", "dB"), ("--median-abg", "dBi"),
                        ("--nominal-gain", "nominal azimuth gain, dBi")):
        sp.add_argument(flag, type=float, help=help_)
    sp.add_argument("--step", type=float, default=1.0, help="distance grid step (m)")
    sp.add_argument("--profile-out", metavar="PATH", help="write distance,snr,rate rows")
    figure(sp)
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("scm-gen", parents=[common], help="write a tx or rx SCM (scm/1 JSON)",
                        description="Build a spectrum consumption model and write canonical JSON.")
    sp.add_argument("output", help="destination .json file")
    sp.add_argument("--kind", choices=("tx", "rx"), default="rx")
    sp.add_argument("--id", default="scm-0001")
    sp.add_argument("--position", help="'e,n,u' in m (default: config rx position)")
    sp.add_argument("--boresight", type=float, default=0.0, help="deg clockwise from north")
    sp.add_argument("--power", type=float, default=-90.0, help="reference power (dBm)")
    sp.add_argument("--center-freq", type=float, default=28e9)
    sp.add_argument("--channel-bw", type=float, default=1e6)
    sp.add_argument("--exponent", type=float, help="uniform propagation exponent")
    sp.add_argument("--resolution", type=float, default=1.0, help="map resolution (deg)")
    sp.add_argument("--start", default="2024-01-01T00:00:00+00:00")
    sp.add_argument("--end", default="2024-01-02T00:00:00+00:00")
    sp.add_argument("--config", help="site/1 config: rx position and per-sector fits")
    pattern(sp, "default")
    sp.set_defaults(func=cmd_scm_gen)

    sp = sub.add_parser("compat", parents=[common], help="aggregate margin of tx SCMs at an rx",
                        description="Aggregate interference margin of transmitters at a receiver.")
    sp.add_argument("--rx", required=True, help="receiver SCM")
    sp.add_argument("--tx", required=True, action="append", help="transmitter SCM (repeatable)")
    sp.set_defaults(func=cmd_compat)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo channel deconfliction",
                        description="Greedy channel assignment over random link layouts.")
    sp.add_argument("--links", type=int, default=100)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--channel-bw", type=float, default=CHANNEL_BW, help="Hz")
    sp.add_argument("--area", type=float, default=AREA_SIDE, help="square side (m)")
    sp.add_argument("--verify", action="store_true", help="recheck every final assignment")
    sp.add_argument("--timing", action="store_true", help="report placement time on stderr")
    sp.add_argument("--summary-json", metavar="PATH", help="machine-readable summary")
    pattern(sp)
    figure(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("stack", parents=[common], help="PAS-versus-distance grid",
                        description="Time-averaged angular spectra stacked by link distance.")
    sp.add_argument("input", help="measurement file (mms/1) or synth:NAME")
    sp.add_argument("--bin-width", type=float, default=1.0)
    figure(sp)
    sp.set_defaults(func=cmd_stack)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ParseError, SchemaError, ValueError, OSError, KeyError) as exc:
        print(f"mmscm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
