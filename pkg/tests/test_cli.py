import json
from pathlib import Path

import pytest

from isskit import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name):
    return json.loads((SCENARIOS / name).read_text())


@pytest.mark.parametrize("name, code", [
    ("simulate_bernoulli.json", 0),
    ("iss_tight_gain.json", 1),
    ("lyapunov_young.json", 0),
    ("etc_integrator.json", 0),
    ("sgc2_violated.json", 1),
    ("network_strong_coupling.json", 2),
])
def test_scenario_exit_codes(tmp_path, name, code):
    assert cli.main(["run", str(SCENARIOS / name), "--out", str(tmp_path)]) == code
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["schema"] == cli.REPORT_SCHEMA
    assert rep["exit_code"] == code
    for art in rep["artifacts"]:
        assert (tmp_path / art).exists()


def test_simulate_reports_escape(tmp_path):
    cli.run_scenario(load("simulate_bernoulli.json"), tmp_path)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"]["status"] == "escaped"


def test_replay_witness_and_report(tmp_path, capsys):
    assert cli.main(["run", str(SCENARIOS / "iss_tight_gain.json"), "--out", str(tmp_path)]) == 1
    assert cli.main(["replay", str(tmp_path / "witness.json")]) == 0
    assert cli.main(["replay", str(tmp_path / "report.json")]) == 0
    assert '"confirmed": true' in capsys.readouterr().out


def test_replay_report_without_witness(tmp_path):
    cli.run_scenario(load("lyapunov_young.json"), tmp_path)
    assert cli.main(["replay", str(tmp_path / "report.json")]) == 3


def test_schema_errors_name_the_field(tmp_path, capsys):
    sc = load("etc_integrator.json")
    sc["sigma"] = 1.5
    del sc["x0"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(sc))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "/sigma" in err
    assert "x0" in err


def test_unknown_system_and_bad_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"kind": "simulate", "system": {"name": "nope"}, "x0": [1], "horizon": 1}')
    assert cli.main(["run", str(p)]) == 3
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == 3
    assert cli.main(["frobnicate"]) == 3


def test_env_overrides(tmp_path):
    sc = load("simulate_bernoulli.json")
    cli.run_scenario(sc, tmp_path, environ={"ISSKIT_INT_REL_TOL": "1e-6"})
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"]["integration"]["rel_tol"] == 1e-6
    sc["integration"] = {"rel_tol": 1e-9}
    cli.run_scenario(sc, tmp_path, environ={"ISSKIT_INT_REL_TOL": "1e-6"})
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"]["integration"]["rel_tol"] == 1e-9
    with pytest.raises(cli.UsageError):
        cli.env_overrides({"ISSKIT_HORIZON": "-1"})


def test_list_builtins(capsys):
    assert cli.main(["list-builtins"]) == 0
    assert "line_network" in capsys.readouterr().out


def test_network_sim_writes_composite_trace(tmp_path):
    assert cli.run_scenario(load("network_sim.json"), tmp_path) == 0
    rows = (tmp_path / "composite_V.csv").read_text().splitlines()
    assert rows[0] == "t,V"
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"]["composite_V"]["max_increase"] <= 1e-9
