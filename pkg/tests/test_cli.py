"""Config validation, reports, replay and the command line."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from dplab.cli import main
from dplab.runner import ConfigError, Table, default_workers, load_config, run, validate_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

PROP61_SMALL = {
    "schema_version": 1, "kind": "padic-verify", "name": "p61", "seed": 3,
    "prop61": {"primes": [3], "ks": [1, 2], "precision": 8, "trials": 200},
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------- schema

def test_shipped_configs_validate():
    files = sorted(CONFIGS.glob("*.json"))
    assert len(files) >= 10
    for f in files:
        load_config(f)


@pytest.mark.parametrize("cfg", [
    {"kind": "qe", "seed": 1},
    {"schema_version": 2, "kind": "qe", "seed": 1},
    {"schema_version": 1, "kind": "qe"},
    {"schema_version": 1, "kind": "teleport", "seed": 1},
    {"schema_version": 1, "kind": "hahn-verify", "seed": 1, "sample_size": 0},
    {"schema_version": 1, "kind": "vc-profile", "structure": "simple_dlo", "delta": [],
     "sizes": [4, 8], "recipe": "random"},
    {"schema_version": 1, "kind": "qe", "seed": 1, "budgets": {"max_seconds": 0}},
])
def test_bad_configs_rejected(cfg):
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_workers_env(monkeypatch):
    monkeypatch.setenv("DPLAB_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("DPLAB_WORKERS", "many")
    with pytest.raises(ConfigError):
        default_workers()


def test_csv_cells():
    t = Table(["a", "b", "c", "d"], [[True, 0.5, None, 7]])
    assert t.csv_body() == "a,b,c,d\ntrue,0.500000,-,7\n"


# ---------------------------------------------------------------- runs

@pytest.mark.parametrize("name", ["breakpoints", "inp_strips", "ict_pair", "refine_pair",
                                  "ict_simple", "vc_simple", "celllike"])
def test_shipped_configs_pass(name, tmp_path, capsys):
    assert main(["run", str(CONFIGS / f"{name}.json"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert (tmp_path / f"{name}.report.json").exists()


def test_vc_pair_reports_slope_failure(capsys):
    # (N+1)^2 at N = 4, 8, 16 fits slope 1.7655, outside 2 +- 0.15
    assert main(["run", str(CONFIGS / "vc_pair.json")]) == 1
    out = capsys.readouterr().out
    assert "[pass] exact counts" in out and "[FAIL] slope" in out and "1.7655" in out


def test_subcommand_with_flags(tmp_path, capsys):
    rc = main(["vc-profile", "--set", "structure=\"simple_dlo\"",
               "--set", 'delta=[{"formula": "x < y", "var": "x", "params": ["y"]}]',
               "--set", "sizes=[2,4]", "--set", "recipe=\"uniform_grid\""])
    assert rc == 0
    assert "simple_dlo,x < y,4,5," in capsys.readouterr().out


def test_empty_delta_profile(capsys):
    rc = main(["vc-profile", "--set", "structure=\"simple_dlo\"", "--set", "delta=[]",
               "--set", "sizes=[2,4]", "--set", "recipe=\"uniform_grid\""])
    assert rc == 0
    assert "simple_dlo,empty,4,1,0.000000" in capsys.readouterr().out


def test_subcommand_kind_mismatch(tmp_path):
    path = _write(tmp_path, PROP61_SMALL)
    assert main(["hahn-verify", "--config", path]) == 2


def test_missing_seed_is_config_error(capsys):
    assert main(["qe"]) == 2
    assert "seed" in capsys.readouterr().err


def test_bad_workers_env(monkeypatch, tmp_path):
    monkeypatch.setenv("DPLAB_WORKERS", "x")
    assert main(["run", _write(tmp_path, PROP61_SMALL)]) == 2


def test_budget_exceeded_is_exit_2(tmp_path):
    cfg = json.loads((CONFIGS / "ict_pair.json").read_text())
    cfg["budgets"] = {"max_pool": 3}
    assert main(["run", _write(tmp_path, cfg)]) == 2


def test_runtime_budget_check():
    cfg = dict(PROP61_SMALL, budgets={"max_seconds": 100})
    rep = run(cfg, 1)
    assert rep.passed and any(c["name"].startswith("runtime") for c in rep.checks)


# ---------------------------------------------------------------- replay

def test_replay_round_trip(tmp_path, capsys):
    assert main(["run", _write(tmp_path, PROP61_SMALL), "--out", str(tmp_path)]) == 0
    report = tmp_path / "p61.report.json"
    assert main(["replay", str(report)]) == 0
    assert "replay: 0 difference(s)" in capsys.readouterr().out


def test_replay_detects_seed_edit(tmp_path, capsys):
    main(["run", _write(tmp_path, PROP61_SMALL), "--out", str(tmp_path)])
    report = tmp_path / "p61.report.json"
    data = json.loads(report.read_text())
    data["config"]["seed"] = 4
    report.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["replay", str(report)]) == 1
    assert "table prop61 line" in capsys.readouterr().out


def test_replay_corrupt_report(tmp_path):
    bad = tmp_path / "bad.report.json"
    bad.write_text('{"config": {"kind": ')
    assert main(["replay", str(bad)]) == 2
    bad.write_text('{"tables": {}}')
    assert main(["replay", str(bad)]) == 2
    assert main(["replay", str(tmp_path / "absent.json")]) == 2


# ---------------------------------------------------------------- qe formula mode

def test_qe_formula_mode(capsys):
    assert main(["qe", "E x. (y < x & f(x) < f(y) & x < z)"]) == 0
    assert "oracle agreement: 81/81" in capsys.readouterr().out


def test_qe_formula_mode_paper_rule_fails(capsys):
    text = "E x. ((0,0) < x & x < (1,0) & (0,0) < f(x) & f(x) < (1,0))"
    assert main(["qe", text]) == 0
    assert main(["qe", text, "--rule", "paper"]) == 1
    out = capsys.readouterr().out
    assert "(no free variables)" in out and "0/1 assignments (paper rule)" in out


def test_qe_formula_errors(capsys):
    assert main(["qe", "E x. x <"]) == 2
    assert main(["qe", "E x. x + f(x) < y"]) == 2


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        main(["vc-profile", "--set", "novalue"])
