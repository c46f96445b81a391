"""SDQN control plane: candidate paths, plan scoring/selection and allocation.

A plan fixes a path, a purification depth and a scheduling mode. Plans are
scored analytically (rate and fidelity), filtered by the latency-coherence
guard, and ranked by the requesting application's utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import networkx as nx
import numpy as np

from .channels import pair_t2, purify_step, t_non_eb, decay_both_halves
from .engine import V_FIBER_KM_S
from .errors import (AllZeroUtility, BadParameter, LatencyCoherenceViolation, MemoryFull, NoPath)
from .link_layer import herald_delay
from .memory import NodeMemory, effective_t2
from .network_layer import ASYNCHRONOUS, SCHEDULING_MODES, SYNCHRONOUS, Path, default_occupancy, estimate_path
from .qnum import UtilitySpec, utility

POLICIES = ("exclusive", "weighted_fair", "fcfs")
EXHAUSTIVE_LIMIT = 10


@dataclass(frozen=True)
class Request:
    id: str
    app_type: str
    src: str
    dst: str
    utility: UtilitySpec
    priority_weight: float = 1.0
    arrival: int = 0

    def __post_init__(self):
        if self.src == self.dst:
            raise BadParameter(f"request {self.id}: src and dst must differ")
        if self.priority_weight <= 0:
            raise BadParameter(f"request {self.id}: priority_weight must be > 0")


@dataclass
class ControllerConfig:
    """Knobs of the controller and of plan scoring."""

    node: Optional[str] = None
    k_paths: int = 3
    max_depth: int = 3
    depths: Optional[tuple[int, ...]] = None
    modes: tuple[str, ...] = SCHEDULING_MODES
    policy: str = "exclusive"
    oracle_controller: bool = False
    enforce_guard: bool = True
    jitter_mode: str = "smooth"
    herald_model: str = "midpoint"
    v_fiber_km_s: float = V_FIBER_KM_S
    mc_trials: int = 20000
    share_step: float = 0.1
    attempt_quota: float = math.inf

    def depth_grid(self) -> tuple[int, ...]:
        return tuple(self.depths) if self.depths is not None else tuple(range(self.max_depth + 1))


@dataclass
class Plan:
    request_id: str
    path: Path
    purification_depth: int
    scheduling: str
    r_est: float = 0.0
    f_est: float = 0.0
    utility: float = 0.0
    charged_wait_s: float = 0.0
    lifetime_s: float = math.inf
    guard_ok: bool = True
    time_share: float = 1.0
    reserved_modes: dict = field(default_factory=dict)
    tdm_windows: dict = field(default_factory=dict)

    def sort_key(self) -> tuple:
        return (self.path.n_hops, self.purification_depth, self.path.nodes, self.scheduling)

    def modes_needed(self) -> dict[str, int]:
        return plan_modes(self.path, self.purification_depth)

    def describe(self) -> str:
        return f"{self.path.label()} d={self.purification_depth} {self.scheduling}"


def plan_modes(path: Path, depth: int) -> dict[str, int]:
    """Memory modes a plan occupies: one per incident link, plus purification buffers at the ends."""
    need = {n: 2 for n in path.repeaters}
    need[path.src] = 2**depth
    need[path.dst] = 2**depth
    return need


def candidate_paths(topology, src: str, dst: str, k: int) -> list[Path]:
    """Up to ``k`` shortest simple paths by hop count, ties in lexicographic node order."""
    topology.node(src)
    topology.node(dst)
    if src == dst:
        raise BadParameter("src and dst must differ")
    if k < 1:
        raise BadParameter("k must be >= 1")
    g = topology.graph
    if not nx.has_path(g, src, dst):
        raise NoPath(f"no path from {src} to {dst}")
    if len(topology) <= EXHAUSTIVE_LIMIT:
        found = [tuple(p) for p in nx.all_simple_paths(g, src, dst)]
    else:
        found = []
        limit = None
        for p in nx.shortest_simple_paths(g, src, dst):
            if limit is not None and len(p) > limit:
                break
            found.append(tuple(p))
            if len(found) >= k and limit is None:
                limit = len(p)
    found.sort(key=lambda p: (len(p), p))
    return [Path.from_nodes(topology, p) for p in found[:k]]


def controller_node(topology, config: ControllerConfig) -> str:
    if config.node is not None:
        topology.node(config.node)
        return config.node
    return sorted(topology.nodes)[0]


def charged_wait(path: Path, depth: int, topology, config: ControllerConfig) -> float:
    """Classical waiting a stored pair on ``path`` must survive.

    Herald of the slowest link, then (with repeaters) the report/command
    round trip to the controller plus the correction notice to the far end,
    then one end-to-end round trip per purification round.
    """
    v = config.v_fiber_km_s
    links = [topology.link(l).params for l in path.links]
    wait = max(herald_delay(lk, v, config.herald_model) for lk in links)
    if path.n_hops > 1:
        ctrl = controller_node(topology, config)
        rtt_ctrl = 0.0 if config.oracle_controller else max(
            2.0 * topology.distance_km(r, ctrl) / v for r in path.repeaters)
        notify = max(max(topology.distance_km(r, path.src), topology.distance_km(r, path.dst)) / v
                     for r in path.repeaters)
        wait += rtt_ctrl + notify
    if depth:
        wait += depth * 2.0 * topology.distance_km(path.src, path.dst) / v
    return wait


def pair_lifetime(path: Path, topology, occupancy: dict | None = None) -> float:
    """Shortest entanglement-preserving lifetime among the path's fresh link pairs."""
    occupancy = occupancy or default_occupancy(path)
    out = math.inf
    for i, lid in enumerate(path.links):
        u, v = path.nodes[i], path.nodes[i + 1]
        t2 = pair_t2(effective_t2(topology.node(u).memory, occupancy.get(u, 1)),
                     effective_t2(topology.node(v).memory, occupancy.get(v, 1)))
        out = min(out, t_non_eb(topology.link(lid).params.f0_link, t2))
    return out


def score(path: Path, depth: int, mode: str, topology, config: ControllerConfig, share: float = 1.0,
          occupancy: dict | None = None) -> tuple[float, float]:
    """Analytic ``(R, F)`` of a plan, purification included."""
    occ = occupancy or default_occupancy(path)
    rate, fid = estimate_path(path, mode, topology, share=share, jitter_mode=config.jitter_mode,
                              occupancy=occ, mc_trials=config.mc_trials)
    if depth:
        rtt = 2.0 * topology.distance_km(path.src, path.dst) / config.v_fiber_km_s
        t2s = effective_t2(topology.node(path.src).memory, occ.get(path.src, 1))
        t2d = effective_t2(topology.node(path.dst).memory, occ.get(path.dst, 1))
        for _ in range(depth):
            fid, p_ok = purify_step(fid)
            fid = decay_both_halves(fid, rtt, t2s, t2d)
            rate = rate / 2.0 * p_ok
    return rate, fid


def make_plans(paths: Sequence[Path], depths: Iterable[int], modes: Iterable[str], topology,
               config: ControllerConfig | None = None, request: Request | None = None,
               share: float = 1.0) -> list[Plan]:
    """Score every (path, depth, mode) combination."""
    config = config or ControllerConfig()
    depths = list(depths)
    modes = list(modes)
    out = []
    for path in paths:
        life = pair_lifetime(path, topology)
        for depth in depths:
            if depth < 0:
                raise BadParameter("purification depth must be >= 0")
            wait = charged_wait(path, depth, topology, config)
            ok = (wait <= life) or not config.enforce_guard
            for mode in modes:
                r, f = score(path, depth, mode, topology, config, share)
                u = utility(request.utility, r, f) if request is not None else 0.0
                out.append(Plan(request.id if request else "", path, depth, mode, r, f, u, wait, life, ok,
                                time_share=share))
    return out


def rank_key(plan: Plan):
    return (-plan.utility, plan.sort_key())


def select_plan(plans: Sequence[Plan], spec: UtilitySpec) -> Plan:
    """Highest-utility plan; ties go to fewer hops, lower depth, then lexicographic path."""
    if not plans:
        raise BadParameter("no candidate plans")
    allowed = [p for p in plans if p.guard_ok]
    if not allowed:
        worst = min(plans, key=lambda p: p.charged_wait_s - p.lifetime_s)
        raise LatencyCoherenceViolation(
            f"classical waiting {worst.charged_wait_s:.3g}s exceeds pair lifetime {worst.lifetime_s:.3g}s")
    for p in allowed:
        p.utility = utility(spec, p.r_est, p.f_est)
    best = min(allowed, key=rank_key)
    if best.utility <= 0.0:
        raise AllZeroUtility(f"no plan reaches F_th={spec.f_threshold}")
    return best


def plans_for(request: Request, topology, config: ControllerConfig, share: float = 1.0) -> list[Plan]:
    try:
        paths = candidate_paths(topology, request.src, request.dst, config.k_paths)
    except NoPath:
        return []
    return make_plans(paths, config.depth_grid(), config.modes, topology, config, request, share)


@dataclass
class AllocationResult:
    plans: dict[str, Plan]
    rejections: dict[str, str]
    decisions: list[dict]
    shares: dict[str, float] = field(default_factory=dict)


def _decision_rows(request: Request, plans: Sequence[Plan], chosen: Plan | None) -> list[dict]:
    rows = []
    for i, p in enumerate(sorted(plans, key=rank_key)):
        rows.append({
            "request_id": request.id, "candidate": i, "path": p.path.label(), "depth": p.purification_depth,
            "scheduling": p.scheduling, "r_est": p.r_est, "f_est": p.f_est, "utility": p.utility,
            "charged_wait_s": p.charged_wait_s, "lifetime_s": p.lifetime_s, "guard_ok": p.guard_ok,
            "chosen": chosen is not None and p is chosen,
        })
    return rows


def _reject_reason(plans: Sequence[Plan]) -> str:
    if not plans:
        return "NoPath"
    if not any(p.guard_ok for p in plans):
        return "LatencyCoherenceViolation"
    return "AllZeroUtility"


def allocate(requests: Sequence[Request], topology, config: ControllerConfig | None = None,
             policy: str | None = None) -> AllocationResult:
    """Greedy admission of ``requests`` with mode reservation.

    ``exclusive``: priority order, modes and links claimed by the first
    admitted plan. ``fcfs``: arrival order, modes claimed, links
    multiplexed. ``weighted_fair``: every link is time-shared in proportion
    to priority weights; a plan's rate is scaled by its share and its
    fidelity re-estimated.
    """
    config = config or ControllerConfig()
    policy = policy or config.policy
    if policy not in POLICIES:
        raise BadParameter(f"unknown policy {policy!r}")
    memories = {n: NodeMemory(n, node.memory) for n, node in topology.nodes.items()}
    claimed_links: set[str] = set()
    result = AllocationResult({}, {}, [])

    if policy == "fcfs":
        order = sorted(requests, key=lambda r: (r.arrival, r.id))
    else:
        order = sorted(requests, key=lambda r: (-r.priority_weight, r.arrival, r.id))

    if policy == "weighted_fair":
        return _allocate_weighted_fair(order, topology, config, memories, result)

    for req in order:
        plans = plans_for(req, topology, config)
        viable = sorted((p for p in plans if p.guard_ok and p.utility > 0), key=rank_key)
        chosen = None
        blocked_by_memory = False
        for p in viable:
            need = p.modes_needed()
            if any(memories[n].free_modes() < k for n, k in need.items()):
                blocked_by_memory = True
                continue
            if policy == "exclusive" and claimed_links.intersection(p.path.links):
                continue
            chosen = p
            break
        result.decisions.extend(_decision_rows(req, plans, chosen))
        if chosen is None:
            if viable:
                result.rejections[req.id] = "MemoryFull" if blocked_by_memory else "LinkBusy"
            else:
                result.rejections[req.id] = _reject_reason(plans)
            continue
        chosen.reserved_modes = {n: [memories[n].reserve_mode(req.id) for _ in range(k)]
                                 for n, k in sorted(chosen.modes_needed().items())}
        if policy == "exclusive":
            claimed_links.update(chosen.path.links)
        result.plans[req.id] = chosen
        result.shares[req.id] = 1.0
    return result


def _allocate_weighted_fair(order, topology, config, memories, result):
    base: dict[str, Plan] = {}
    held: dict[str, dict[str, list[int]]] = {}
    weights = {r.id: r.priority_weight for r in order}
    for req in order:
        plans = plans_for(req, topology, config)
        viable = sorted((p for p in plans if p.guard_ok and p.utility > 0), key=rank_key)
        fits = [p for p in viable if all(memories[n].free_modes() >= k for n, k in p.modes_needed().items())]
        if not fits:
            result.decisions.extend(_decision_rows(req, plans, None))
            result.rejections[req.id] = "MemoryFull" if viable else _reject_reason(plans)
            continue
        base[req.id] = fits[0]
        held[req.id] = {n: [memories[n].reserve_mode(req.id) for _ in range(k)]
                        for n, k in sorted(fits[0].modes_needed().items())}
    users: dict[str, list[str]] = {}
    for rid, p in base.items():
        for lid in p.path.links:
            users.setdefault(lid, []).append(rid)
    offsets: dict[str, float] = {}
    for req in order:
        if req.id not in base:
            continue
        path = base[req.id].path
        share = min(weights[req.id] / sum(weights[o] for o in users[lid]) for lid in path.links)
        plans = make_plans([path], config.depth_grid(), config.modes, topology, config, req, share)
        own = held[req.id]
        viable = sorted((p for p in plans if p.guard_ok and p.utility > 0
                         and all(len(own.get(n, ())) >= k for n, k in p.modes_needed().items())), key=rank_key)
        chosen = viable[0] if viable else None
        result.decisions.extend(_decision_rows(req, plans, chosen))
        if chosen is None:
            for n, modes in own.items():
                for m in modes:
                    memories[n].release(m)
            result.rejections[req.id] = "UtilityCollapse"
            continue
        chosen.time_share = share
        windows = {}
        for lid in path.links:
            start = offsets.get(lid, 0.0)
            windows[lid] = (start, share)
            offsets[lid] = start + share
        chosen.tdm_windows = windows
        need = chosen.modes_needed()
        chosen.reserved_modes = {}
        for n, modes in sorted(own.items()):
            k = need.get(n, 0)
            chosen.reserved_modes[n] = modes[:k]
            for m in modes[k:]:
                memories[n].release(m)
        result.plans[req.id] = chosen
        result.shares[req.id] = share
    return result


def simulate_time_shares(shares: dict[str, float], n_slots: int, rng: np.random.Generator) -> dict[str, float]:
    """Monte-Carlo TDM slot assignment; returns the realized fraction of slots per flow."""
    ids = sorted(shares)
    w = np.array([shares[i] for i in ids], dtype=float)
    picks = rng.choice(len(ids), size=n_slots, p=w / w.sum())
    counts = np.bincount(picks, minlength=len(ids))
    return {i: float(c) / n_slots for i, c in zip(ids, counts)}
