import csv
import json

import pytest

from qnetsim.cli import main

from test_scenario import MINIMAL


def _cfg(tmp_path, doc=MINIMAL):
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--config", _cfg(tmp_path)]) == 0
    assert "config_hash=" in capsys.readouterr().out


def test_validation_exit_code(tmp_path):
    doc = dict(MINIMAL, nodes=[{"name": "a", "preset": "nope"}, "b"])
    assert main(["validate", "--config", _cfg(tmp_path, doc)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_runtime_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", _cfg(tmp_path), "--out", str(blocker / "sub")]) == 3


def test_run_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", _cfg(tmp_path), "--seed", "9", "--replications", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert [r["seed"] for r in rows] == ["9", "10"]
    assert json.loads((out / "summary.json").read_text())["root_seed"] == 9


def test_run_format_csv_only(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", _cfg(tmp_path), "--format", "csv", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["decisions.csv", "metrics.csv"]


def test_shipped_name_and_flags(tmp_path):
    out = tmp_path / "lc"
    assert main(["run", "--config", "latency_coherence", "--oracle-controller", "--jitter-mode", "hard",
                 "--format", "csv", "--out", str(out)]) == 0
    row = next(csv.DictReader(open(out / "metrics.csv")))
    assert row["admitted"] == "True"


def test_presets(capsys):
    assert main(["presets"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert "trapped_ion" in data["presets"] and "repeater_chain" in data["scenarios"]


def test_sweep(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", _cfg(tmp_path), "--set", "links.*.length_km=1,2,3", "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "sweep.csv")))
    assert len(rows) == 4 and rows[0][1] == "links.*.length_km"
    assert main(["sweep", "--config", _cfg(tmp_path), "--out", str(out)]) == 2


def test_bad_seed_rejected(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run", "--config", _cfg(tmp_path), "--seed", "-1"])
    assert info.value.code == 2
