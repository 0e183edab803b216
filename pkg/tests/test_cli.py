import csv
import json
import subprocess
import sys

from fhsim.cli import main

SHORT = ["--duration-s", "0.05", "--seed", "3"]


def test_run_writes_run_directory(tmp_path, capsys):
    assert main(["run", "--dl-strategy", "mcs-opt", "--srs-mode", "dyn-time",
                 "--out", str(tmp_path)] + SHORT) == 0
    (run_dir,) = list(tmp_path.iterdir())
    assert run_dir.name.endswith("_seed3")
    for name in ("config.json", "summary.csv", "files.csv", "cdf.csv", "srs_trace.csv"):
        assert (run_dir / name).is_file()
    cfg = json.loads((run_dir / "config.json").read_text())
    assert cfg["dl_strategy"] == "MCSOpt" and cfg["duration"] == 0.05
    assert "mean" in capsys.readouterr().out


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FHSIM_OUT", str(tmp_path / "env"))
    assert main(["run"] + SHORT) == 0
    assert any((tmp_path / "env").iterdir())


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"fh_capacity_dl": 1e9, "dl_strategy": "Drop"}))
    assert main(["run", "--config", str(cfg), "--fh-dl-gbps", "0.25", "--dl-strategy",
                 "postpone", "--out", str(tmp_path / "o")] + SHORT) == 0
    (run_dir,) = list((tmp_path / "o").iterdir())
    written = json.loads((run_dir / "config.json").read_text())
    assert written["fh_capacity_dl"] == 0.25e9 and written["dl_strategy"] == "Postpone"


def test_missing_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["run", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_value_exits_2(tmp_path):
    assert main(["run", "--fh-dl-gbps", "-1", "--out", str(tmp_path)]) == 2
    assert main(["run", "--dl-strategy", "bogus"]) == 2


def test_unknown_key_exits_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert main(["run", "--config", str(cfg)]) == 2


def test_infeasible_runtime_mode_exits_1(tmp_path):
    assert main(["run", "--srs-transfer", "symbol", "--out", str(tmp_path)] + SHORT) == 1


def test_sweep(tmp_path):
    camp = tmp_path / "camp.json"
    camp.write_text(json.dumps({"dl_strategy": ["Postpone", "RBOpt"], "srs_mode": ["DynTimeMux"],
                                "srs_period": [50], "seeds": [1, 2],
                                "overrides": {"duration": 0.05}}))
    assert main(["sweep", str(camp), "--out", str(tmp_path / "out")]) == 0
    out = tmp_path / "out"
    rows = list(csv.DictReader(open(out / "comparison.csv")))
    assert {r["dl_strategy"] for r in rows} == {"Postpone", "RBOpt"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_failed"] == 0 and len(manifest["runs"]) == 4
    assert len(list((out / "cdf").iterdir())) == 2


def test_sweep_continues_past_failure(tmp_path):
    camp = tmp_path / "camp.json"
    camp.write_text(json.dumps({"dl_strategy": ["RBOpt"], "srs_mode": ["DynTimeMux"],
                                "srs_period": [50], "seeds": [1],
                                "overrides": {"duration": 0.05,
                                              "srs_transfer_shape": "SymbolBySymbol"}}))
    assert main(["sweep", str(camp), "--out", str(tmp_path / "out")]) == 1
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["n_failed"] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fhsim", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
