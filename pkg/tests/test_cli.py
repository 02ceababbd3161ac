import json

import pytest
import yaml
from click.testing import CliRunner
from hypothesis import given, strategies as st

from blowup.cli_orchestrator import (ConfigError, RunConfig, exit_code, main, run_pipeline,
                                     template_text)


def test_template_round_trip():
    d = yaml.safe_load(template_text())
    assert RunConfig.from_dict(d) == RunConfig()


@given(st.floats(0.0, 1.0).filter(lambda e: not 3 / 8 < e < 0.5))
def test_eps2_range(e):
    with pytest.raises(ConfigError):
        RunConfig(eps2=e).validate()


@given(st.floats(-5, 1.0))
def test_nu_must_exceed_one(nu):
    with pytest.raises(ConfigError):
        RunConfig(nu=nu).validate()


def test_eps1_and_tolerances():
    with pytest.raises(ConfigError):
        RunConfig(eps1=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"tolerances": {"unitarity": 0.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"colour": "blue"})


def test_only_profile_stage(tmp_path):
    rep = run_pipeline(RunConfig(), tmp_path, ["profile"], echo=lambda *_: None)
    status = {r["id"]: r["status"] for r in rep["rows"]}
    assert status[1] == "pass"
    assert all(status[i] == "not-run" for i in range(2, 13))
    assert len(rep["rows"]) == 12 and exit_code(rep) == 0
    files = rep["manifest"]["files"]
    assert {"report.json", "FORMATS.md", "profile/ground_state.csv"} <= set(files)


def test_determinism(tmp_path):
    a = run_pipeline(RunConfig(), tmp_path / "a", ["profile"], echo=lambda *_: None)
    b = run_pipeline(RunConfig(), tmp_path / "b", ["profile"], echo=lambda *_: None)
    assert a["manifest"]["files"] == b["manifest"]["files"]


def test_forced_failure(tmp_path):
    cfg = RunConfig()
    cfg.tolerances = {**cfg.tolerances, "ground_state": 0.0}
    rep = run_pipeline(cfg, tmp_path, ["profile"], echo=lambda *_: None)
    assert rep["failing"] == [1] and exit_code(rep) == 1


def test_cli_commands(tmp_path):
    r = CliRunner()
    cfg = tmp_path / "c.yaml"
    assert r.invoke(main, ["init", "--out", str(cfg)]).exit_code == 0
    out = tmp_path / "run"
    res = r.invoke(main, ["profile", "--config", str(cfg), "--out", str(out), "--threads", "1"])
    assert res.exit_code == 0, res.output
    assert "criterion 1" in res.output
    res = r.invoke(main, ["report", "--config", str(cfg), "--out", str(out)])
    assert res.exit_code == 0 and "[NOT-RUN] criterion 7" in res.output
    rep = json.loads((out / "report.json").read_text())
    assert rep["not_run"] == list(range(2, 13))
    bad = tmp_path / "bad.yaml"
    bad.write_text("nu: 0.5\n")
    assert r.invoke(main, ["run", "--config", str(bad), "--out", str(out)]).exit_code != 0
