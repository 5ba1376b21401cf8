import csv
import json
import os
import subprocess
import sys

import pytest

from charvar import params as prm
from charvar.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def strip_time(report):
    report = dict(report)
    report.pop("timestamp")
    return report


def test_sample_roundtrips_through_params_file(tmp_path, capsys):
    code, rep = run(capsys, "sample", "--n", "5", "--seed", "3")
    assert code == 0
    assert rep["command"] == "sample"
    path = tmp_path / "c.json"
    path.write_text(json.dumps(rep["result"]["params"]))
    assert prm.load(str(path)).tensor.tolist() == prm.sample(5, 3).tensor.tolist()


def test_report_envelope(capsys):
    code, rep = run(capsys, "limits", "--n", "5", "--seed", "1")
    assert code == 0
    assert {"command", "version", "config", "threads", "timestamp", "result"} <= set(rep)
    assert rep["config"]["n"] == 5 and rep["config"]["seed"] == 1
    pred = rep["result"]["prediction"]
    assert pred["total"] == 10 + pred["alpha"] + 2 * pred["beta"] + 3 * pred["gamma"]


def test_reports_are_deterministic(capsys):
    _, a = run(capsys, "smooth", "--n", "4", "--seed", "2", "--samples", "300")
    _, b = run(capsys, "smooth", "--n", "4", "--seed", "2", "--samples", "300")
    assert strip_time(a) == strip_time(b)


def test_thread_count_does_not_change_results(monkeypatch, capsys):
    monkeypatch.setenv("CHARVAR_THREADS", "1")
    _, a = run(capsys, "count", "--n", "5", "--seed", "1", "--t", "1e-4")
    monkeypatch.setenv("CHARVAR_THREADS", "3")
    _, b = run(capsys, "count", "--n", "5", "--seed", "1", "--t", "1e-4")
    assert a["threads"] == 1 and b["threads"] == 3
    assert a["result"] == b["result"]
    assert a["result"]["match"]


def test_check_exit_codes(tmp_path, capsys):
    assert run(capsys, "check", "--n", "5", "--seed", "1")[0] == 0
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(prm.sample(5, 0, dist="point").to_json()))
    code, rep = run(capsys, "check", "--params", str(path))
    assert code == 2
    assert rep["result"]["report"]


def test_degenerate_params_exit_two(tmp_path, capsys):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(prm.sample(5, 0, dist="point").to_json()))
    assert main(["count", "--params", str(path)]) == 2
    assert "degenerate" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["count"],                              # no --n and no --params
    ["nonsense"],
    ["sample", "--n", "5", "--dist", "cauchy"],
    ["reduce", "--n", "3", "--radius", "0.5"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1


def test_malformed_params_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["limits", "--params", str(bad)]) == 1
    assert main(["limits", "--params", str(tmp_path / "missing.json")]) == 1


def test_params_dimension_conflict(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(prm.sample(5, 1).to_json()))
    assert main(["limits", "--params", str(path), "--n", "6"]) == 1


def test_out_directory(tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["reduce", "--n", "3", "--seed", "2", "--samples", "3", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    rep = json.loads((out / "reduce.json").read_text())
    assert rep["command"] == "reduce"
    rows = list(csv.DictReader((out / "reduce_A0.csv").open()))
    assert len(rows) == 27


def test_sweep_writes_table_and_plot(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "--n", "5", "--seed", "1", "--ts", "1e-3", "1e-4", "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists()
    assert "plot" in (out / "sweep.gp").read_text()


def test_verify_embed_and_curvature(capsys):
    code, rep = run(capsys, "verify-embed", "--n", "4", "--seed", "0")
    assert code == 0
    code, rep = run(capsys, "curvature", "--n", "3", "--seed", "0")
    assert code == 0


def test_entry_point_installed():
    exe = os.path.join(os.path.dirname(sys.executable), "charvar")
    cmd = [exe] if os.path.exists(exe) else [sys.executable, "-m", "charvar.cli"]
    proc = subprocess.run(cmd + ["witness", "--n", "3", "--seed", "1"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "witness"
