import csv
import json
import subprocess
import sys

import pytest

from blackstart import data_path
from blackstart.cli import main
from blackstart.export import TIMELINE_HEADER, read_scheme, skeleton_dot, timeline_rows

TOY = str(data_path("toy6.json"))
IEEE = str(data_path("ieee39.json"))
REF = str(data_path("ieee39_reference_scheme.json"))


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_optimize_artifacts(tmp_path, capsys):
    out = tmp_path / "run1"
    code, text, _ = run(["optimize", "--grid", TOY, "--seed", "7", "--out", str(out), "--generations", "5"], capsys)
    assert code == 0
    assert "F = " in text and "HVDC start" in text and "final P_D" in text
    for name in ("scheme.json", "timeline.csv", "stages.csv", "history.csv", "skeleton.dot", "manifest.json"):
        assert (out / name).stat().st_size > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["rng_seed"] == 7
    assert manifest["command"] == "optimize"
    for name in manifest["files"]:
        assert (out / name).stat().st_size > 0
    with open(out / "timeline.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TIMELINE_HEADER
    for row in rows[1:]:
        for value, col in zip(row, TIMELINE_HEADER):
            if value:
                decimals = 3 if col == "scr" else 2
                assert len(value.split(".")[1]) == decimals


def test_optimize_repeatable(tmp_path, capsys):
    args = ["optimize", "--grid", TOY, "--seed", "7", "--generations", "5"]
    run(args + ["--out", str(tmp_path / "a")], capsys)
    run(args + ["--out", str(tmp_path / "b")], capsys)
    for name in ("scheme.json", "timeline.csv", "stages.csv", "history.csv", "skeleton.dot"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unseeded_run_records_seed(tmp_path, capsys):
    code, _, _ = run(["optimize", "--grid", TOY, "--generations", "2", "--subpops", "2", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert isinstance(json.loads((tmp_path / "manifest.json").read_text())["rng_seed"], int)


def test_usage_errors(capsys):
    assert run(["optimize"], capsys)[0] == 64
    assert run([], capsys)[0] == 64
    assert run(["frobnicate", "--grid", TOY], capsys)[0] == 64
    assert run(["optimize", "--grid", TOY, "--format", "xml"], capsys)[0] == 64


def test_simulate_reference(tmp_path, capsys):
    code, text, _ = run(["simulate", "--grid", IEEE, "--scheme", REF, "--out", str(tmp_path)], capsys)
    assert code == 0 and "feasible" in text
    with open(tmp_path / "stages.csv") as fh:
        rows = list(csv.DictReader(fh))
    hv = next(r for r in rows if r["source"] == "39")
    assert float(hv["connect_time_min"]) == 105.0


def test_simulate_formats_agree(tmp_path, capsys):
    run(["simulate", "--grid", TOY, "--scheme", REF_TOY(tmp_path), "--out", str(tmp_path / "c")], capsys)
    run(["simulate", "--grid", TOY, "--scheme", REF_TOY(tmp_path), "--out", str(tmp_path / "j"), "--format", "json"], capsys)
    with open(tmp_path / "c" / "timeline.csv") as fh:
        from_csv = [{k: (float(v) if v else None) for k, v in r.items()} for r in csv.DictReader(fh)]
    from_json = json.loads((tmp_path / "j" / "timeline.json").read_text())
    assert from_csv == from_json


def REF_TOY(tmp_path):
    p = tmp_path / "toy_scheme.json"
    p.write_text(json.dumps({"order": [1, 4, 5, 2, 3, 6], "include_link": [3]}))
    return str(p)


def test_simulate_unreachable(tmp_path, capsys):
    p = tmp_path / "short.json"
    p.write_text(json.dumps({"order": [1, 4, 5]}))
    code, text, _ = run(["simulate", "--grid", TOY, "--scheme", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    assert "6" in text


def test_simulate_names_constraint(tmp_path, capsys):
    doc = json.loads(open(TOY).read())
    doc["branches"][4]["flow_limits"] = [-5.0, 5.0]
    grid = tmp_path / "tight.json"
    grid.write_text(json.dumps(doc))
    code, text, _ = run(["simulate", "--grid", str(grid), "--scheme", REF_TOY(tmp_path), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and "branch_flow" in text


def test_invalid_grid(tmp_path, capsys):
    doc = json.loads(open(TOY).read())
    doc["branches"][0]["endpoints"] = [1, 99]
    grid = tmp_path / "bad.json"
    grid.write_text(json.dumps(doc))
    assert run(["validate", "--grid", str(grid)], capsys)[0] == 1
    assert run(["validate", "--grid", str(tmp_path / "missing.json")], capsys)[0] == 1


def test_validate(capsys):
    code, text, _ = run(["validate", "--grid", IEEE, "--scheme", REF], capsys)
    assert code == 0 and "scheme ok" in text


def test_overrides(tmp_path, capsys):
    assert run(["validate", "--grid", TOY, "--scr-floor", "2"], capsys)[0] == 1
    code, _, _ = run(["simulate", "--grid", TOY, "--scheme", REF_TOY(tmp_path), "--scr-floor", "4", "--out", str(tmp_path / "o")], capsys)
    assert code in (0, 2)
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["overrides"] == {"scr_floor": 4.0}


def test_baseline_and_compare(tmp_path, capsys):
    order = "31,32,37,35,39,30,33,34,36,38"
    code, text, _ = run(["baseline", "--grid", IEEE, "--order", order, "--against", REF, "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "delta" in text
    s = read_scheme(tmp_path / "scheme.json")
    assert not s.include_link
    assert run(["baseline", "--grid", IEEE, "--order", "31,32", "--out", str(tmp_path / "x")], capsys)[0] == 1


def test_dot_semantics(toy6):
    from blackstart.simulate import RestorationScheme, simulate

    dot = skeleton_dot(toy6, simulate(toy6, RestorationScheme((1, 4, 5, 2, 3, 6), {3})))
    assert "3 -- 4" in dot and "style=dashed" in dot
    assert "1 [shape=box]" in dot and "6 [shape=box]" in dot
    assert "shape=doublecircle" in dot
    assert dot.count("style=solid") == 5


def test_timeline_rows(reference_timeline):
    rows = timeline_rows(reference_timeline)
    assert all(r["scr"] is None for r in rows if r["p_d_mw"] == 0)
    assert all(r["scr"] >= 3 - 1e-9 for r in rows if r["p_d_mw"] > 0)


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "blackstart.cli", "validate", "--grid", TOY], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "grid ok" in proc.stdout


def test_threads_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BLACKSTART_THREADS", "2")
    a = run(["optimize", "--grid", TOY, "--seed", "4", "--generations", "3", "--out", str(tmp_path / "p")], capsys)
    monkeypatch.setenv("BLACKSTART_THREADS", "1")
    b = run(["optimize", "--grid", TOY, "--seed", "4", "--generations", "3", "--out", str(tmp_path / "q")], capsys)
    assert a[0] == b[0] == 0
    assert (tmp_path / "p" / "scheme.json").read_bytes() == (tmp_path / "q" / "scheme.json").read_bytes()
