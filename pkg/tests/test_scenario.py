import json
import math

import pytest

from qnetsim.errors import ParseError, ValidationError
from qnetsim.link_layer import LinkParams, expected_link_rate
from qnetsim.metrics import aggregate
from qnetsim.scenario import (PRESETS, Scenario, config_hash, emit_report, normalize, parse_scenario,
                              parse_scenario_text, read_metrics_csv, run_scenario, shipped_scenarios, summary_dict,
                              sweep)

MINIMAL = {
    "duration_s": 0.01,
    "nodes": ["a", "b"],
    "links": [{"a": "a", "b": "b", "length_km": 1.0}],
    "requests": [{"id": "q", "app_type": "QKD", "src": "a", "dst": "b"}],
}


def _write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_minimal_defaults(tmp_path):
    sc = parse_scenario(_write(tmp_path, MINIMAL))
    assert sc.replications == 1 and sc.root_seed == 0
    assert sc.doc["herald_model"] == "midpoint"
    assert sc.doc["controller"]["policy"] == "exclusive"
    assert sc.doc["links"][0]["f0_link"] == LinkParams().f0_link
    assert sc.doc["nodes"][0]["memory"]["num_modes"] == 10
    assert sc.doc["requests"][0]["f_threshold"] == 0.85


def test_unknown_preset_names_field():
    doc = dict(MINIMAL, nodes=[{"name": "a", "preset": "warp_core"}, "b"])
    with pytest.raises(ValidationError, match=r"nodes\[0\]\.preset"):
        normalize(doc)


def test_t2_above_twice_t1():
    doc = dict(MINIMAL, nodes=[{"name": "a", "memory": {"t1_s": 0.1, "t2_s": 0.5}}, "b"])
    with pytest.raises(ValidationError, match=r"nodes\[0\]\.memory.*2\*T1"):
        normalize(doc)


def test_all_problems_reported():
    doc = {"nodes": [{"name": "a", "preset": "nope"}], "links": [{"a": "a", "b": "zz"}], "bogus": 1,
           "requests": [{"app_type": "XYZ", "src": "a", "dst": "a"}]}
    with pytest.raises(ValidationError) as info:
        normalize(doc)
    paths = [p for p, _ in info.value.problems]
    for expected in ("duration_s", "nodes[0].preset", "links[0].b", "bogus", "requests[0].app_type"):
        assert expected in paths


def test_parse_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    with pytest.raises(ParseError):
        parse_scenario(bad)
    with pytest.raises(ParseError):
        parse_scenario(tmp_path / "missing.json")


def test_presets_valid():
    for name in PRESETS:
        doc = dict(MINIMAL, defaults={"preset": name})
        assert normalize(doc)["nodes"][0]["memory"]["t2_s"] == PRESETS[name]["t2_s"]
    assert PRESETS["trapped_ion"]["t2_s"] == 1.0 and PRESETS["trapped_ion"]["num_modes"] == 10
    assert PRESETS["atomic_ensemble"]["t2_s"] == 0.01 and PRESETS["atomic_ensemble"]["num_modes"] == 1000


def test_config_hash_semantics():
    base = normalize(MINIMAL)
    spelled = dict(MINIMAL, name="other", description="x", root_seed=42, replications=1, herald_model="midpoint")
    assert config_hash(normalize(spelled)) == config_hash(base)
    reformatted = parse_scenario_text(json.dumps(MINIMAL, indent=4, sort_keys=True))
    assert reformatted.config_hash() == config_hash(base)
    changed = dict(MINIMAL, links=[{"a": "a", "b": "b", "length_km": 1.5}])
    assert config_hash(normalize(changed)) != config_hash(base)
    assert Scenario(base).with_overrides(oracle_controller=True).config_hash() != config_hash(base)


def test_replication_determinism():
    sc = Scenario(normalize(dict(MINIMAL, root_seed=5)))
    a, b = run_scenario(sc), run_scenario(sc)
    assert [r.row() for r in a.reports] == [r.row() for r in b.reports]


def test_parallel_equals_serial():
    sc = Scenario(normalize(dict(MINIMAL, replications=4)))
    serial, parallel = run_scenario(sc, 1), run_scenario(sc, 2)
    assert [r.row() for r in serial.reports] == [r.row() for r in parallel.reports]
    assert [r.seed for r in serial.reports] == [0, 1, 2, 3]


def test_perfect_link_rate_ci():
    # lossless fiber, ideal memories, F0 = 1; a 0.1 km link keeps herald dead time negligible
    doc = {
        "duration_s": 1.0, "replications": 100, "root_seed": 17,
        "nodes": [{"name": "a", "preset": "ideal"}, {"name": "b", "preset": "ideal"}],
        "links": [{"a": "a", "b": "b", "length_km": 0.1, "attenuation_db_per_km": 0.0, "attempt_rate_hz": 1e4,
                   "f0_link": 1.0, "extra_efficiency": 0.1}],
        "requests": [{"id": "q", "app_type": "QKD", "src": "a", "dst": "b"}],
        "controller": {"depths": [0]},
    }
    sc = Scenario(normalize(doc))
    agg = run_scenario(sc).aggregate()["q"]["effective_eps"]
    expected = expected_link_rate(sc.topology().link("a-b").params)
    assert agg["ci95_low"] <= expected <= agg["ci95_high"]


def test_emit_report_formats(tmp_path):
    sc = Scenario(normalize(dict(MINIMAL, replications=3)))
    rs = run_scenario(sc)
    assert sorted(p.split("/")[-1] for p in emit_report(rs, tmp_path / "c", "csv")) == ["decisions.csv", "metrics.csv"]
    assert [p.split("/")[-1] for p in emit_report(rs, tmp_path / "s", "structured")] == ["summary.json"]
    both = emit_report(rs, tmp_path / "b", "both")
    assert len(both) == 3
    summary = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert summary["config_hash"] == sc.config_hash()
    assert summary["root_seed"] == 0 and summary["version"].startswith("v")
    assert "aggregate" in summary and summary["pair_accounting"]
    back = aggregate(read_metrics_csv(tmp_path / "b" / "metrics.csv"))
    orig = rs.aggregate()
    for rid, cols in orig.items():
        for col, stats in cols.items():
            for k, v in stats.items():
                w = back[rid][col][k]
                assert (math.isnan(v) and math.isnan(w)) or abs(v - w) <= 1e-9 * max(1.0, abs(v))


def test_summary_is_strict_json():
    rs = run_scenario(Scenario(normalize(MINIMAL)))
    text = json.dumps(summary_dict(rs))
    assert "Infinity" not in text and "NaN" not in text


def test_sweep_rows():
    header, rows = sweep(json.loads(json.dumps(MINIMAL)), {"links.*.length_km": [1.0, 5.0]})
    assert header[:2] == ["point", "links.*.length_km"]
    assert len(rows) == 2 and rows[0][2] == 1.0


@pytest.mark.parametrize("name", sorted(shipped_scenarios()))
def test_shipped_scenarios_valid(name):
    sc = parse_scenario(shipped_scenarios()[name])
    assert sc.name == name
