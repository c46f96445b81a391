import numpy as np
import pytest

from qnetsim.channels import NoiseParams
from qnetsim.control import (ControllerConfig, Plan, Request, allocate, candidate_paths, make_plans, select_plan,
                             simulate_time_shares)
from qnetsim.errors import AllZeroUtility, LatencyCoherenceViolation, NoPath
from qnetsim.link_layer import LinkParams
from qnetsim.memory import MemoryParams
from qnetsim.network_layer import Path, estimate_path
from qnetsim.qnum import UtilitySpec
from qnetsim.topology import Topology

from conftest import chain


def _ring(n):
    topo = Topology()
    names = [f"v{i}" for i in range(n)]
    for v in names:
        topo.add_node(v)
    for i in range(n):
        topo.add_link(names[i], names[(i + 1) % n], LinkParams(5.0))
    return topo


def test_direct_link_single_path():
    paths = candidate_paths(chain(1), "n0", "n1", 3)
    assert [p.nodes for p in paths] == [("n0", "n1")]


def test_square_two_paths_lexicographic():
    topo = _ring(4)
    paths = candidate_paths(topo, "v0", "v2", 3)
    assert [p.nodes for p in paths] == [("v0", "v1", "v2"), ("v0", "v3", "v2")]


def test_ring_shortest_first():
    paths = candidate_paths(_ring(5), "v0", "v2", 3)
    assert [p.n_hops for p in paths] == [2, 3]


def test_no_path():
    topo = chain(1)
    topo.add_node("island")
    with pytest.raises(NoPath):
        candidate_paths(topo, "n0", "island", 2)


def test_make_plans_depths():
    topo = chain(1, f0=0.7, t2=1e9)
    path = Path.from_nodes(topo, ["n0", "n1"])
    cfg = ControllerConfig()
    plans = make_plans([path], [0, 1, 2], ["asynchronous"], topo, cfg)
    r0, f0 = estimate_path(path, "asynchronous", topo)
    assert (plans[0].r_est, plans[0].f_est) == (r0, f0)
    assert plans[1].f_est == pytest.approx(0.735294117647058823, abs=1e-9)
    assert plans[1].r_est == pytest.approx(r0 / 2 * 0.68, rel=1e-9)
    rates = [p.r_est for p in plans]
    assert rates == sorted(rates, reverse=True)


def _plan(r, f, nodes=("a", "b")):
    return Plan("x", Path(nodes, ("l",)), 0, "asynchronous", r, f)


def test_select_plan_threshold_decides():
    dqc = UtilitySpec("DQC", 0.95)
    fast, slow = _plan(100, 0.94), _plan(30, 0.96)
    assert select_plan([fast, slow], dqc) is slow
    assert fast.utility == 0.0
    qkd = UtilitySpec("QKD", 0.85)
    fast, slow = _plan(100, 0.94), _plan(30, 0.96)
    assert select_plan([fast, slow], qkd) is fast
    only = _plan(10, 0.99)
    assert select_plan([only], dqc) is only


def test_select_plan_errors():
    with pytest.raises(AllZeroUtility):
        select_plan([_plan(10, 0.9)], UtilitySpec("DQC", 0.95))
    bad = _plan(10, 0.99)
    bad.guard_ok = False
    with pytest.raises(LatencyCoherenceViolation):
        select_plan([bad], UtilitySpec("DQC", 0.95))


def _req(rid, src, dst, app="QKD", w=1.0, arrival=0):
    return Request(rid, app, src, dst, UtilitySpec(app), w, arrival)


def test_allocate_single_request():
    topo = chain(1)
    res = allocate([_req("a", "n0", "n1")], topo, ControllerConfig(depths=(0,)))
    assert list(res.plans) == ["a"] and not res.rejections


def test_exclusive_memory_bottleneck():
    topo = Topology()
    topo.add_node("hub", MemoryParams(num_modes=1))
    for leaf in ("x", "y"):
        topo.add_node(leaf)
        topo.add_link("hub", leaf, LinkParams(2.0))
    reqs = [_req("first", "hub", "x", w=2.0), _req("second", "hub", "y")]
    res = allocate(reqs, topo, ControllerConfig(depths=(0,)), policy="exclusive")
    assert "first" in res.plans
    assert res.rejections == {"second": "MemoryFull"}


def test_weighted_fair_shares():
    topo = chain(1, modes=4)
    reqs = [_req("heavy", "n0", "n1", w=2.0), _req("light", "n0", "n1", w=1.0, arrival=1)]
    res = allocate(reqs, topo, ControllerConfig(depths=(0,)), policy="weighted_fair")
    assert res.shares["heavy"] == pytest.approx(2 / 3)
    assert res.shares["light"] == pytest.approx(1 / 3)
    full = estimate_path(res.plans["heavy"].path, res.plans["heavy"].scheduling, topo)[0]
    assert res.plans["heavy"].r_est == pytest.approx(full * 2 / 3, rel=1e-12)
    # realized slot fractions follow the shares
    realized = simulate_time_shares(res.shares, 200_000, np.random.default_rng(0))
    assert realized["heavy"] / realized["light"] == pytest.approx(2.0, rel=0.01)
    # reservations never double-book a mode
    modes = [m for p in res.plans.values() for m in p.reserved_modes["n0"]]
    assert len(modes) == len(set(modes))


def test_guard_rejects_slow_controller():
    names = ["a", "r", "b", "c"]
    topo = Topology()
    for n in names:
        topo.add_node(n, MemoryParams(t2_s=0.005), NoiseParams())
    for a, b, length in (("a", "r", 10.0), ("r", "b", 10.0), ("r", "c", 1000.0)):
        topo.add_link(a, b, LinkParams(length, f0_link=0.95))
    req = _req("q", "a", "b")
    cfg = ControllerConfig(node="c", depths=(0,))
    assert allocate([req], topo, cfg).rejections["q"] == "LatencyCoherenceViolation"
    cfg_o = ControllerConfig(node="c", depths=(0,), oracle_controller=True)
    assert "q" in allocate([req], topo, cfg_o).plans
