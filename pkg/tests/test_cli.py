import json
import subprocess
import sys
from pathlib import Path

import pytest

from mmscm.cli import main

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ("synth", "ingest", "validate", "metrics", "fit", "compare", "coverage",
            "scm-gen", "compat", "simulate", "stack")


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return rc, cap.out, cap.err


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    """Two small synthetic datasets plus a tx/rx SCM pair."""
    d = tmp_path_factory.mktemp("cli")
    small = ("--samples-per-scan", "72", "--scans", "8")
    assert main(["synth", "Int-N-E", "--links", "6", *small, "-o", str(d / "ne.mms")]) == 0
    assert main(["synth", "Int-S-W", "--links", "5", *small, "--seed", "1",
                 "-o", str(d / "sw.mms")]) == 0
    assert main(["scm-gen", str(d / "rx.json"), "--kind", "rx", "--id", "rx-1",
                 "--position", "0,0,0", "--boresight", "90", "--resolution", "10",
                 "--exponent", "2.8"]) == 0
    for i, (pos, bore) in enumerate([("60,0,0", 270), ("-50,30,0", 120)]):
        assert main(["scm-gen", str(d / f"tx{i}.json"), "--kind", "tx", "--id", f"tx-{i}",
                     f"--position={pos}", "--boresight", str(bore), "--power", "-10",
                     "--resolution", "10", "--exponent", "2.8"]) == 0
    return d


def golden_cases(d):
    ne, sw = d / "ne.mms", d / "sw.mms"
    return {
        "synth_list": ["synth", "--list"],
        "ingest": ["ingest", ne, sw],
        "validate": ["validate", ne],
        "metrics": ["metrics", ne],
        "fit": ["fit", ne, sw, "--pooled", "all"],
        "compare": ["compare", ne, sw, "--step", "100"],
        "coverage": ["coverage", "--row", "Int-S-W"],
        "coverage_fit": ["coverage", "--fit=-3.6,-39.2", "--range", "20,317", "--tx-power", "25"],
        "compat": ["compat", "--rx", d / "rx.json", "--tx", d / "tx0.json", "--tx", d / "tx1.json"],
        "simulate": ["simulate", "--links", "5", "--trials", "4", "--seed", "3"],
        "stack": ["stack", ne, "--bin-width", "30"],
    }


NAMES = ("synth_list", "ingest", "validate", "metrics", "fit", "compare", "coverage",
         "coverage_fit", "compat", "simulate", "stack")


@pytest.mark.parametrize("name", NAMES)
def test_golden_output(name, data, capsys, update_golden):
    argv = golden_cases(data)[name]
    rc, out, err = run(capsys, *argv)
    assert rc == 0, err
    path = GOLDEN / f"{name}.txt"
    if update_golden:
        path.write_text(out)
    assert out == path.read_text()
    # identical inputs, flags and seed give identical bytes
    assert run(capsys, *argv)[1] == out


def test_golden_synth_file(data, tmp_path, update_golden):
    out = tmp_path / "en.mms"
    assert main(["synth", "Int-E-N", "--links", "3", "--samples-per-scan", "12", "--scans", "2",
                 "--seed", "5", "-o", str(out)]) == 0
    path = GOLDEN / "synth_int_e_n.mms"
    if update_golden:
        path.write_bytes(out.read_bytes())
    assert out.read_bytes() == path.read_bytes()


def test_golden_scm(data, update_golden):
    path = GOLDEN / "scm_rx.json"
    raw = (data / "rx.json").read_bytes()
    if update_golden:
        path.write_bytes(raw)
    assert raw == path.read_bytes()
    doc = json.loads(raw)
    assert doc["schema"] == "scm/1" and doc["kind"] == "receiver"


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as ei:
        main([cmd, "--help"])
    assert ei.value.code == 0
    assert "usage: mmscm " + cmd in capsys.readouterr().out


def test_console_script_and_module():
    proc = subprocess.run([sys.executable, "-m", "mmscm.cli", "simulate", "--links", "1",
                           "--trials", "5", "--seed", "7"], capture_output=True, text=True)
    assert proc.returncode == 0
    rows = [ln for ln in proc.stdout.splitlines() if not ln.startswith("#")]
    assert rows == ["channels,trials,fraction", "1,5,1"]


def test_fit_bundled_int_n_e(capsys):
    rc, out, _ = run(capsys, "fit", "synth:Int-N-E")
    assert rc == 0
    head, row = out.splitlines()[:2]
    cols = dict(zip(head.split(","), row.split(",")))
    assert abs(float(cols["n"]) + 3.5) <= 0.2
    assert int(cols["links"]) == 101


def test_coverage_int_s_w_cutoff(capsys):
    rc, out, _ = run(capsys, "coverage", "--row", "Int-S-W")
    rows = dict(ln.split(",", 1) for ln in out.splitlines() if not ln.startswith("#"))
    assert rc == 0
    assert 170 <= float(rows["cutoff_m"]) <= 215
    assert "degradation" in out


def test_summary_json_and_timing(tmp_path, capsys):
    js = tmp_path / "s.json"
    rc, _, err = run(capsys, "simulate", "--links", "6", "--trials", "3", "--seed", "2",
                     "--area", "300", "--verify", "--timing", "--summary-json", js)
    assert rc == 0 and "place" in err
    doc = json.loads(js.read_text())
    assert doc["links"] == 6 and sum(doc["histogram"].values()) == 3
    assert doc["all_valid"] is True


@pytest.mark.parametrize("argv", [
    ["metrics", "--figure", "{d}/m.png", "{d}/ne.mms"],
    ["fit", "--figure", "{d}/f.png", "{d}/ne.mms", "{d}/sw.mms"],
    ["compare", "--figure", "{d}/c.png", "{d}/ne.mms"],
    ["coverage", "--row", "Int-S-W", "--figure", "{d}/cov.png"],
    ["simulate", "--links", "3", "--trials", "2", "--figure", "{d}/h.png"],
    ["stack", "{d}/ne.mms", "--figure", "{d}/s.png"],
])
def test_figures(argv, data, capsys):
    argv = [a.format(d=data) for a in argv]
    rc, _, err = run(capsys, *argv)
    assert rc == 0, err
    fig = Path(argv[argv.index("--figure") + 1])
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_profile_out(tmp_path, capsys):
    prof = tmp_path / "p.csv"
    assert run(capsys, "coverage", "--row", "Int-S-W", "--step", "50", "--profile-out", prof)[0] == 0
    lines = prof.read_text().splitlines()
    assert lines[0] == "distance_m,snr_db,rate_bps"
    assert len(lines) > 3


def test_ingest_canonical(data, tmp_path, capsys):
    out = tmp_path / "c.mms"
    assert run(capsys, "ingest", data / "ne.mms", "--canonical", out)[0] == 0
    assert out.read_text() == (data / "ne.mms").read_text()


def test_missing_file(capsys):
    rc, _, err = run(capsys, "metrics", "/nonexistent/x.mms")
    assert rc == 1 and "mmscm metrics: error:" in err


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["fit", "--bogus"])
    assert ei.value.code == 2


def test_bad_scm(tmp_path, data, capsys):
    bad = tmp_path / "bad.json"
    doc = json.loads((data / "rx.json").read_text())
    doc["spectrum_mask"] = doc["underlay_mask"]
    bad.write_text(json.dumps(doc))
    rc, _, err = run(capsys, "compat", "--rx", bad, "--tx", data / "tx0.json")
    assert rc == 1 and "spectrum_mask" in err


def test_unknown_synth_name(capsys):
    rc, _, err = run(capsys, "fit", "synth:Nope-X")
    assert rc == 1 and "error" in err


def test_strict_validate(data, capsys):
    assert run(capsys, "validate", data / "ne.mms", "--strict")[0] == 1


def test_site_config(tmp_path, capsys):
    from importlib.resources import files
    cfg = files("mmscm") / "data" / "site_int.json"
    rc, out, err = run(capsys, "coverage", "--config", cfg, "--row", "Int-S-W")
    assert rc == 0, err
    bad = tmp_path / "site.json"
    doc = json.loads(cfg.read_text())
    doc["sidewalks"]["Int-N-E"]["sector"] = [100, 400]
    bad.write_text(json.dumps(doc))
    rc, _, err = run(capsys, "coverage", "--config", bad, "--row", "Int-S-W")
    assert rc == 1 and "sector" in err
