import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cgoslab.cli import EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE, main

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def _csv_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# scenario_hash=")
    return list(csv.DictReader(lines[1:]))


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8


def test_malformed_scenario_is_a_usage_error(capsys):
    assert main(["verdict", str(SCEN / "malformed.json")]) == EXIT_USAGE
    assert "schema violation" in capsys.readouterr().err


def test_missing_file_is_a_usage_error(tmp_path):
    assert main(["verdict", str(tmp_path / "nope.json")]) == EXIT_USAGE


def test_inadmissible_xi_is_a_precondition_failure(tmp_path, capsys):
    rc = main(["pair", "--scenario", str(SCEN / "q_bump.json"), "--xi", "0,0,2", "--out", str(tmp_path),
               "--grid-scale", "0.5"])
    assert rc == EXIT_PRECONDITION
    assert "precondition failed" in capsys.readouterr().err


def test_pair_writes_result_with_provenance(tmp_path):
    rc = main(["pair", "--scenario", str(SCEN / "q_bump.json"), "--xi", "1,1,1", "--h", "0.2,0.1,0.05",
               "--out", str(tmp_path), "--grid-scale", "0.5"])
    assert rc == EXIT_OK
    body = json.loads((tmp_path / "pair.json").read_text())
    assert body["kind"] == "electric"
    assert [s["h"] for s in body["h_sweep"]] == [0.2, 0.1, 0.05]
    assert len(body["provenance"]["scenario_hash"]) == 64 and body["provenance"]["grid_scale"] == 0.5


def test_run_writes_report_csvs_and_fields(tmp_path, capsys):
    rc = main(["run", str(SCEN / "q_bump.json"), "--out", str(tmp_path), "--grid-scale", "0.5"])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["verdict"] == rep["ground_truth"]["verdict"] == "q differs"
    assert len(_csv_rows(tmp_path / "samples.csv")) == 5
    spec = _csv_rows(tmp_path / "spectrum.csv")
    assert {"recovered_re", "quadrature_re"} <= set(spec[0])
    assert (tmp_path / "fields" / "p1.json").exists() and (tmp_path / "fields" / "p2_q.bin").exists()
    assert "verdict: q differs" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["verdict", str(SCEN / "q_bump.json"), "--out", str(d), "--grid-scale", "0.5"])
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_dbar_test_and_cgo_sweep(tmp_path, capsys):
    assert main(["dbar-test", "--sizes", "64,128", "--out", str(tmp_path)]) == EXIT_OK
    res = json.loads((tmp_path / "dbar_test.json").read_text())
    assert res["slope_gaussian_rel_l2"] > 1.7
    rc = main(["cgo-sweep", "--scenario", str(SCEN / "gauge_pair.json"), "--h", "0.4,0.2", "--xi", "1,1,0.5",
               "--out", str(tmp_path), "--grid-scale", "0.5"])
    assert rc == EXIT_OK
    rows = _csv_rows(tmp_path / "cgo_sweep.csv")
    assert [float(r["h"]) for r in rows] == [0.4, 0.2]
    assert "slope" in capsys.readouterr().out


def test_dtn_export(tmp_path):
    rc = main(["dtn-export", "--scenario", str(SCEN / "q_bump.json"), "--count", "2", "--out", str(tmp_path),
               "--grid-scale", "0.5"])
    assert rc == EXIT_OK
    man = json.loads((tmp_path / "dtn" / "manifest.json").read_text())
    assert len(man["samples"]) == 2
    from cgoslab.fieldio import read_field
    f = read_field(tmp_path / "dtn" / man["samples"][0]["output"])
    assert f.data.ndim == 2


@pytest.mark.parametrize("argv", [["--version"], ["selftest", "--help"]])
def test_module_entry_point(argv):
    r = subprocess.run([sys.executable, "-m", "cgoslab.cli", *argv], capture_output=True, text=True)
    assert r.returncode == 0 and "cgoslab" in (r.stdout + r.stderr)
