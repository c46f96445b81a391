"""Scenario files, hardware presets, replication runs and report files.

A scenario is a JSON document describing nodes, fiber links, requests,
controller knobs and run settings. Parsing resolves presets and defaults
into a normalized document; everything downstream (the config hash, the
simulation) works from that normalized form.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import itertools
import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any, Iterable, Optional

from . import __version__
from .channels import NoiseParams
from .control import POLICIES, ControllerConfig, Request
from .engine import V_FIBER_KM_S
from .errors import BadParameter, ParseError, QNetError, ValidationError
from .link_layer import HERALD_MODELS, LinkParams
from .memory import MemoryParams
from .metrics import METRIC_COLUMNS, MetricsReport, aggregate
from .network_layer import SCHEDULING_MODES
from .qnum import APP_TYPES, UtilitySpec
from .simulator import simulate
from .topology import Topology

#: Order-of-magnitude hardware stand-ins, named after common memory platforms.
PRESETS: dict[str, dict[str, Any]] = {
    "trapped_ion": {"t1_s": None, "t2_s": 1.0, "num_modes": 10, "p_swap": 0.5, "p_gate_depol": 0.001},
    "atomic_ensemble": {"t1_s": None, "t2_s": 0.01, "num_modes": 1000, "p_swap": 0.5, "p_gate_depol": 0.01},
    "nv_center": {"t1_s": None, "t2_s": 0.1, "num_modes": 4, "p_swap": 0.5, "p_gate_depol": 0.005},
    "superconducting": {"t1_s": 2e-4, "t2_s": 1e-4, "num_modes": 50, "p_swap": 0.9, "p_gate_depol": 0.002},
    "ideal": {"t1_s": None, "t2_s": 1e6, "num_modes": 64, "p_swap": 1.0, "p_gate_depol": 0.0},
}

MEMORY_FIELDS = ("t1_s", "t2_s", "num_modes", "crosstalk_chi", "cutoff_s")
NOISE_FIELDS = ("p_swap", "p_gate_depol", "jitter_sigma_s", "pulse_width_s")
LINK_FIELDS = ("length_km", "attenuation_db_per_km", "attempt_rate_hz", "f0_link", "extra_efficiency")
REQUEST_FIELDS = ("id", "app_type", "src", "dst", "f_threshold", "f_ec", "value_per_pair", "steepness", "weight",
                  "priority_weight", "arrival")
CONTROLLER_FIELDS = ("node", "policy", "allocator", "k_paths", "max_depth", "depths", "modes", "oracle_controller",
                     "enforce_guard", "jitter_mode", "mc_trials", "share_step", "attempt_quota")
TOP_FIELDS = ("name", "description", "duration_s", "replications", "root_seed", "v_fiber_km_s", "min_latency_s",
              "herald_model", "defaults", "nodes", "links", "requests", "controller")
# fields that do not change what is simulated
_COSMETIC = ("name", "description", "root_seed")


def version_string() -> str:
    """``git describe``-style version, falling back to the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


class _Checker:
    def __init__(self):
        self.problems: list[tuple[str, str]] = []

    def add(self, path: str, msg: str) -> None:
        self.problems.append((path, msg))

    def unknown(self, obj: dict, allowed: Iterable[str], path: str) -> None:
        for key in obj:
            if key not in allowed:
                self.add(f"{path}.{key}" if path else key, "unknown field")

    def number(self, obj: dict, key: str, path: str, default=None, *, integer=False, positive=False,
               nonneg=False, allow_none=False):
        val = obj.get(key, default)
        where = f"{path}.{key}" if path else key
        if val is None:
            if allow_none or default is None and key not in obj:
                return val
            self.add(where, "must not be null")
            return default
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.add(where, f"expected a number, got {type(val).__name__}")
            return default
        if integer and int(val) != val:
            self.add(where, "expected an integer")
            return default
        if positive and not val > 0:
            self.add(where, "must be > 0")
        if nonneg and val < 0:
            self.add(where, "must be >= 0")
        return int(val) if integer else float(val)


def _inf(v):
    return math.inf if v is None else v


def _resolve_node(raw, idx: int, defaults: dict, ck: _Checker) -> Optional[dict]:
    path = f"nodes[{idx}]"
    if isinstance(raw, str):
        raw = {"name": raw}
    if not isinstance(raw, dict):
        ck.add(path, "expected an object or a node name")
        return None
    ck.unknown(raw, ("name", "preset", "memory", "noise"), path)
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        ck.add(f"{path}.name", "required non-empty string")
        return None
    preset_name = raw.get("preset", defaults.get("preset"))
    values: dict[str, Any] = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            ck.add(f"{path}.preset", f"unknown preset {preset_name!r}; known: {', '.join(sorted(PRESETS))}")
        else:
            values.update(PRESETS[preset_name])
    for section, fields in (("memory", MEMORY_FIELDS), ("noise", NOISE_FIELDS)):
        for src, where in ((defaults.get(section, {}), f"defaults.{section}"), (raw.get(section, {}), f"{path}.{section}")):
            if not isinstance(src, dict):
                ck.add(where, "expected an object")
                continue
            ck.unknown(src, fields, where)
            values.update({k: v for k, v in src.items() if k in fields})
    mem = {k: values[k] for k in MEMORY_FIELDS if k in values}
    noise = {k: values[k] for k in NOISE_FIELDS if k in values}
    out = {"name": name, "memory": {}, "noise": {}}
    try:
        mp = MemoryParams(**{k: _inf(v) if k == "t1_s" else v for k, v in mem.items()})
        out["memory"] = {"t1_s": None if math.isinf(mp.t1_s) else mp.t1_s, "t2_s": mp.t2_s,
                         "num_modes": int(mp.num_modes), "crosstalk_chi": mp.crosstalk_chi, "cutoff_s": mp.cutoff_s}
    except (BadParameter, TypeError) as exc:
        msg = str(exc)
        if "physical limit" in msg:
            msg += " (T2 <= 2*T1)"
        ck.add(f"{path}.memory", msg)
    try:
        npar = NoiseParams(**noise)
        out["noise"] = dataclasses.asdict(npar)
    except (BadParameter, TypeError) as exc:
        ck.add(f"{path}.noise", str(exc))
    return out


def normalize(doc: dict) -> dict:
    """Validate a raw scenario document and fill every default.

    Raises :class:`ValidationError` listing every problem with its field path.
    """
    ck = _Checker()
    if not isinstance(doc, dict):
        raise ValidationError([("", "scenario must be a JSON object")])
    ck.unknown(doc, TOP_FIELDS, "")
    out: dict[str, Any] = {
        "name": doc.get("name", ""),
        "description": doc.get("description", ""),
    }
    dur = ck.number(doc, "duration_s", "", None, positive=True)
    if "duration_s" not in doc:
        ck.add("duration_s", "required")
    out["duration_s"] = dur
    reps = ck.number(doc, "replications", "", 1, integer=True)
    if reps is not None and reps < 1:
        ck.add("replications", "must be >= 1")
    out["replications"] = reps
    seed = ck.number(doc, "root_seed", "", 0, integer=True, nonneg=True)
    out["root_seed"] = seed
    out["v_fiber_km_s"] = ck.number(doc, "v_fiber_km_s", "", V_FIBER_KM_S, positive=True)
    out["min_latency_s"] = ck.number(doc, "min_latency_s", "", 0.0, nonneg=True)
    hm = doc.get("herald_model", "midpoint")
    if hm not in HERALD_MODELS:
        ck.add("herald_model", f"must be one of {', '.join(HERALD_MODELS)}")
    out["herald_model"] = hm

    defaults = doc.get("defaults", {})
    if not isinstance(defaults, dict):
        ck.add("defaults", "expected an object")
        defaults = {}
    ck.unknown(defaults, ("preset", "memory", "noise", "link"), "defaults")

    nodes = []
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        ck.add("nodes", "required non-empty list")
        raw_nodes = []
    seen = set()
    for i, rn in enumerate(raw_nodes):
        node = _resolve_node(rn, i, defaults, ck)
        if node is None:
            continue
        if node["name"] in seen:
            ck.add(f"nodes[{i}].name", f"duplicate node {node['name']!r}")
        seen.add(node["name"])
        nodes.append(node)
    out["nodes"] = nodes

    link_defaults = defaults.get("link", {})
    if not isinstance(link_defaults, dict):
        ck.add("defaults.link", "expected an object")
        link_defaults = {}
    ck.unknown(link_defaults, LINK_FIELDS, "defaults.link")
    links = []
    raw_links = doc.get("links", [])
    if not isinstance(raw_links, list):
        ck.add("links", "expected a list")
        raw_links = []
    link_ids = set()
    for i, rl in enumerate(raw_links):
        path = f"links[{i}]"
        if not isinstance(rl, dict):
            ck.add(path, "expected an object")
            continue
        ck.unknown(rl, ("id", "a", "b") + LINK_FIELDS, path)
        a, b = rl.get("a"), rl.get("b")
        for key, val in (("a", a), ("b", b)):
            if val not in seen:
                ck.add(f"{path}.{key}", f"unknown node {val!r}")
        if a == b and a is not None:
            ck.add(path, "a link needs two distinct endpoints")
        params = {k: v for k, v in link_defaults.items() if k in LINK_FIELDS}
        params.update({k: rl[k] for k in LINK_FIELDS if k in rl})
        try:
            lp = LinkParams(**params)
        except (BadParameter, TypeError) as exc:
            ck.add(path, str(exc))
            continue
        lid = rl.get("id") or "-".join(sorted((str(a), str(b))))
        if lid in link_ids:
            ck.add(f"{path}.id", f"duplicate link {lid!r}")
        link_ids.add(lid)
        links.append({"id": lid, "a": a, "b": b, **dataclasses.asdict(lp)})
    out["links"] = links

    requests = []
    raw_reqs = doc.get("requests", [])
    if not isinstance(raw_reqs, list):
        ck.add("requests", "expected a list")
        raw_reqs = []
    req_ids = set()
    for i, rr in enumerate(raw_reqs):
        path = f"requests[{i}]"
        if not isinstance(rr, dict):
            ck.add(path, "expected an object")
            continue
        ck.unknown(rr, REQUEST_FIELDS, path)
        rid = str(rr.get("id", f"r{i}"))
        if rid in req_ids:
            ck.add(f"{path}.id", f"duplicate request {rid!r}")
        req_ids.add(rid)
        app = rr.get("app_type")
        if app not in APP_TYPES:
            ck.add(f"{path}.app_type", f"must be one of {', '.join(APP_TYPES)}")
            continue
        for key in ("src", "dst"):
            if rr.get(key) not in seen:
                ck.add(f"{path}.{key}", f"unknown node {rr.get(key)!r}")
        try:
            spec = UtilitySpec(app, rr.get("f_threshold"), rr.get("f_ec", 1.0), rr.get("value_per_pair", 1.0),
                               rr.get("steepness", 50.0), rr.get("weight", 1.0))
            Request(rid, app, rr.get("src"), rr.get("dst"), spec, rr.get("priority_weight", 1.0),
                    rr.get("arrival", i))
        except (BadParameter, TypeError) as exc:
            ck.add(path, str(exc))
            continue
        requests.append({
            "id": rid, "app_type": app, "src": rr["src"], "dst": rr["dst"], "f_threshold": spec.f_threshold,
            "f_ec": spec.f_ec, "value_per_pair": spec.value_per_pair, "steepness": spec.steepness,
            "weight": spec.weight, "priority_weight": float(rr.get("priority_weight", 1.0)),
            "arrival": int(rr.get("arrival", i)),
        })
    out["requests"] = requests

    rc = doc.get("controller", {})
    if not isinstance(rc, dict):
        ck.add("controller", "expected an object")
        rc = {}
    ck.unknown(rc, CONTROLLER_FIELDS, "controller")
    ctrl = {
        "node": rc.get("node"),
        "policy": rc.get("policy", "exclusive"),
        "allocator": rc.get("allocator", "greedy"),
        "k_paths": ck.number(rc, "k_paths", "controller", 3, integer=True, positive=True),
        "max_depth": ck.number(rc, "max_depth", "controller", 3, integer=True, nonneg=True),
        "depths": rc.get("depths"),
        "modes": list(rc.get("modes", SCHEDULING_MODES)),
        "oracle_controller": bool(rc.get("oracle_controller", False)),
        "enforce_guard": bool(rc.get("enforce_guard", True)),
        "jitter_mode": rc.get("jitter_mode", "smooth"),
        "mc_trials": ck.number(rc, "mc_trials", "controller", 20000, integer=True, positive=True),
        "share_step": ck.number(rc, "share_step", "controller", 0.1, positive=True),
        "attempt_quota": ck.number(rc, "attempt_quota", "controller", None, integer=True, positive=True,
                                   allow_none=True),
    }
    if ctrl["node"] is not None and ctrl["node"] not in seen:
        ck.add("controller.node", f"unknown node {ctrl['node']!r}")
    if ctrl["policy"] not in POLICIES:
        ck.add("controller.policy", f"must be one of {', '.join(POLICIES)}")
    if ctrl["allocator"] not in ("greedy", "qnum"):
        ck.add("controller.allocator", "must be 'greedy' or 'qnum'")
    if ctrl["jitter_mode"] not in ("smooth", "hard"):
        ck.add("controller.jitter_mode", "must be 'smooth' or 'hard'")
    for m in ctrl["modes"]:
        if m not in SCHEDULING_MODES:
            ck.add("controller.modes", f"unknown scheduling mode {m!r}")
    if ctrl["depths"] is not None:
        if not isinstance(ctrl["depths"], list) or not all(isinstance(d, int) and d >= 0 for d in ctrl["depths"]):
            ck.add("controller.depths", "expected a list of non-negative integers")
        else:
            ctrl["depths"] = sorted(set(ctrl["depths"]))
    out["controller"] = ctrl

    if ck.problems:
        raise ValidationError(ck.problems)
    try:
        build_topology(out)
    except QNetError as exc:
        raise ValidationError([("links", str(exc))]) from None
    return out


def build_topology(norm: dict) -> Topology:
    topo = Topology()
    for n in norm["nodes"]:
        mem = dict(n["memory"])
        mem["t1_s"] = _inf(mem["t1_s"])
        topo.add_node(n["name"], MemoryParams(**mem), NoiseParams(**n["noise"]))
    for lk in norm["links"]:
        params = LinkParams(**{k: lk[k] for k in LINK_FIELDS})
        topo.add_link(lk["a"], lk["b"], params, lk["id"])
    return topo


def build_requests(norm: dict) -> list[Request]:
    out = []
    for r in norm["requests"]:
        spec = UtilitySpec(r["app_type"], r["f_threshold"], r["f_ec"], r["value_per_pair"], r["steepness"],
                           r["weight"])
        out.append(Request(r["id"], r["app_type"], r["src"], r["dst"], spec, r["priority_weight"], r["arrival"]))
    return out


def build_config(norm: dict) -> ControllerConfig:
    c = norm["controller"]
    return ControllerConfig(
        node=c["node"], k_paths=c["k_paths"], max_depth=c["max_depth"],
        depths=tuple(c["depths"]) if c["depths"] is not None else None, modes=tuple(c["modes"]),
        policy=c["policy"], oracle_controller=c["oracle_controller"], enforce_guard=c["enforce_guard"],
        jitter_mode=c["jitter_mode"], herald_model=norm["herald_model"], v_fiber_km_s=norm["v_fiber_km_s"],
        mc_trials=c["mc_trials"], share_step=c["share_step"],
        attempt_quota=math.inf if c["attempt_quota"] is None else c["attempt_quota"],
    )


@dataclass
class Scenario:
    """A validated, fully resolved scenario."""

    doc: dict
    source: Optional[str] = None

    @property
    def name(self) -> str:
        return self.doc["name"]

    @property
    def root_seed(self) -> int:
        return self.doc["root_seed"]

    @property
    def replications(self) -> int:
        return self.doc["replications"]

    @property
    def duration_s(self) -> float:
        return self.doc["duration_s"]

    def topology(self) -> Topology:
        return build_topology(self.doc)

    def requests(self) -> list[Request]:
        return build_requests(self.doc)

    def config(self) -> ControllerConfig:
        return build_config(self.doc)

    def config_hash(self) -> str:
        return config_hash(self.doc)

    def with_overrides(self, *, seed=None, replications=None, oracle_controller=None, jitter_mode=None) -> "Scenario":
        doc = copy.deepcopy(self.doc)
        if seed is not None:
            doc["root_seed"] = int(seed)
        if replications is not None:
            doc["replications"] = int(replications)
        if oracle_controller is not None:
            doc["controller"]["oracle_controller"] = bool(oracle_controller)
        if jitter_mode is not None:
            doc["controller"]["jitter_mode"] = jitter_mode
        return Scenario(normalize(doc), self.source)


def config_hash(norm: dict) -> str:
    """SHA-256 over the canonical JSON of the normalized scenario.

    Formatting, key order, explicitly spelled-out defaults, the name,
    the description and the root seed do not affect the hash.
    """
    sem = {k: v for k, v in norm.items() if k not in _COSMETIC}
    blob = json.dumps(_jsonable(sem), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_scenario_text(text: str, source: str | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source or '<string>'}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return Scenario(normalize(doc), source)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    try:
        text = FsPath(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from None
    return parse_scenario_text(text, str(path))


def shipped_scenarios() -> dict[str, FsPath]:
    root = FsPath(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.json"))}


# --- runs --------------------------------------------------------------------

@dataclass
class ReportSet:
    scenario: Scenario
    reports: list[MetricsReport]
    decisions: list[dict]
    node_stats: list[dict]
    conservation: list[dict]
    version: str = ""

    @property
    def seed(self) -> int:
        return self.scenario.root_seed

    def aggregate(self) -> dict:
        return aggregate(self.reports)


def _run_one(doc: dict, index: int) -> dict:
    sc = Scenario(doc)
    seed = sc.root_seed + index
    res = simulate(sc.topology(), sc.requests(), sc.config(), sc.duration_s, seed,
                   allocator=doc["controller"]["allocator"], keep_log=False, replication=index,
                   min_latency_s=doc["min_latency_s"])
    decisions = [dict(d, replication=index) for d in res.allocation.decisions]
    stats = [dict(s, replication=index) for s in res.node_stats]
    cons = [dict(c, replication=index, request_id=rid) for rid, c in sorted(res.conservation.items())]
    return {"reports": res.reports, "decisions": decisions, "node_stats": stats, "conservation": cons}


def run_scenario(scenario: Scenario, workers: int = 1) -> ReportSet:
    """Run every replication (seed ``root_seed + i``) and fold results in replication order."""
    idx = range(scenario.replications)
    if workers > 1 and scenario.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_one, itertools.repeat(scenario.doc), idx))
    else:
        parts = [_run_one(scenario.doc, i) for i in idx]
    out = ReportSet(scenario, [], [], [], [], version_string())
    for part in parts:
        out.reports.extend(part["reports"])
        out.decisions.extend(part["decisions"])
        out.node_stats.extend(part["node_stats"])
        out.conservation.extend(part["conservation"])
    return out


# --- report files --------------------------------------------------------------

DECISION_COLUMNS = ("replication", "request_id", "candidate", "path", "depth", "scheduling", "r_est", "f_est",
                    "utility", "charged_wait_s", "lifetime_s", "guard_ok", "chosen")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_metrics_csv(reports: Iterable[MetricsReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in reports:
            w.writerow([_cell(v) for v in r.row()])


def read_metrics_csv(path) -> list[MetricsReport]:
    """Inverse of :func:`write_metrics_csv`."""
    types = {f.name: f.type for f in dataclasses.fields(MetricsReport)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                if t in ("int", int):
                    kw[k] = int(v)
                elif t in ("float", float):
                    kw[k] = float(v)
                elif t in ("bool", bool):
                    kw[k] = v == "True"
                else:
                    kw[k] = v
            out.append(MetricsReport(**kw))
    return out


def summary_dict(rs: ReportSet) -> dict:
    sc = rs.scenario
    return _jsonable({
        "name": sc.name,
        "config_hash": sc.config_hash(),
        "root_seed": sc.root_seed,
        "replications": sc.replications,
        "duration_s": sc.duration_s,
        "version": rs.version,
        "columns": list(METRIC_COLUMNS),
        "aggregate": rs.aggregate(),
        "rejections": sorted({(r.request_id, r.reason) for r in rs.reports if not r.admitted}),
        "node_stats": rs.node_stats,
        "pair_accounting": rs.conservation,
    })


def emit_report(rs: ReportSet, out_dir, formats: str | Iterable[str] = "both") -> list[str]:
    """Write ``metrics.csv`` + ``decisions.csv`` and/or ``summary.json`` into ``out_dir``."""
    if isinstance(formats, str):
        formats = ("csv", "structured") if formats == "both" else (formats,)
    formats = tuple(formats)
    for f in formats:
        if f not in ("csv", "structured"):
            raise BadParameter(f"unknown report format {f!r}")
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if "csv" in formats:
        p = out / "metrics.csv"
        write_metrics_csv(rs.reports, p)
        files.append(str(p))
        p = out / "decisions.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DECISION_COLUMNS)
            for d in rs.decisions:
                w.writerow([_cell(d.get(c, "")) for c in DECISION_COLUMNS])
        files.append(str(p))
    if "structured" in formats:
        p = out / "summary.json"
        p.write_text(json.dumps(summary_dict(rs), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        files.append(str(p))
    return files


# --- sweeps --------------------------------------------------------------------

SWEEP_COLUMNS = ("point", "admitted", "delivered", "effective_eps", "fidelity_mean", "skr_bits_per_s", "utility",
                 "mean_quantum_delay_s")


def set_path(doc: dict, dotted: str, value) -> None:
    """Assign ``value`` at a dotted path; ``*`` fans out over list items."""
    parts = dotted.split(".")

    def walk(obj, i):
        key = parts[i]
        last = i == len(parts) - 1
        if isinstance(obj, list):
            targets = range(len(obj)) if key == "*" else [int(key)]
            for t in targets:
                if last:
                    obj[t] = value
                else:
                    walk(obj[t], i + 1)
            return
        if last:
            obj[key] = value
            return
        if key not in obj:
            obj[key] = {}
        walk(obj[key], i + 1)

    try:
        walk(doc, 0)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ValidationError([(dotted, f"cannot set sweep parameter ({exc})")]) from None


def sweep(raw_doc: dict, grid: dict[str, list], workers: int = 1) -> tuple[list[str], list[list]]:
    """Run the scenario at every point of the parameter grid; one row per point."""
    keys = list(grid)
    header = list(SWEEP_COLUMNS[:1]) + keys + list(SWEEP_COLUMNS[1:])
    rows = []
    for point, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        doc = copy.deepcopy(raw_doc)
        for k, v in zip(keys, values):
            set_path(doc, k, v)
        sc = Scenario(normalize(doc))
        rs = run_scenario(sc, workers)
        reps = rs.reports
        n_rep = sc.replications
        delivered = sum(r.delivered for r in reps)
        fid = math.fsum(r.fidelity_mean * r.delivered for r in reps) / delivered if delivered else 0.0
        delay = math.fsum(r.mean_quantum_delay_s * r.delivered for r in reps) / delivered if delivered else 0.0
        rows.append([point, *values,
                     sum(r.admitted for r in reps) / n_rep,
                     delivered / n_rep,
                     math.fsum(r.effective_eps for r in reps) / n_rep,
                     fid,
                     math.fsum(r.skr_bits_per_s for r in reps) / n_rep,
                     math.fsum(r.utility for r in reps) / n_rep,
                     delay])
    return header, rows
