"""Quantum network utility maximization.

Per-application utilities ``U(R, F) = R * phi(F)`` with a hard fidelity
threshold, a joint plan/share optimizer over a discrete grid, admission
control on top of it, and an exhaustive reference solver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import qber_from_fidelity
from .errors import BadParameter, InstanceTooLarge
from .metrics import SkrParams, secret_key_rate

APP_TYPES = ("QKD", "DQC", "DQS")
DEFAULT_THRESHOLDS = {"QKD": 0.85, "DQC": 0.95, "DQS": 0.99}


@dataclass(frozen=True)
class UtilitySpec:
    """Utility shape of one application class.

    ``weight`` converts the native unit (secret bits/s for QKD, pairs/s
    otherwise) into the common currency used when utilities are summed.
    """

    app_type: str
    f_threshold: Optional[float] = None
    f_ec: float = 1.0
    value_per_pair: float = 1.0
    steepness: float = 50.0
    weight: float = 1.0

    def __post_init__(self):
        if self.app_type not in APP_TYPES:
            raise BadParameter(f"unknown application type {self.app_type!r}")
        if self.f_threshold is None:
            object.__setattr__(self, "f_threshold", DEFAULT_THRESHOLDS[self.app_type])
        if not 2.0 / 3.0 < self.f_threshold <= 1.0:
            raise BadParameter(f"F_th={self.f_threshold!r} outside (2/3, 1]")
        if self.f_ec < 1.0:
            raise BadParameter("f_ec must be >= 1")
        if self.steepness < 0 or self.value_per_pair < 0 or self.weight < 0:
            raise BadParameter("shape parameters must be non-negative")


def utility(spec: UtilitySpec, rate: float, fidelity: float) -> float:
    """``U(R, F)``; zero whenever ``F < F_th``."""
    if rate < 0:
        raise BadParameter("rate must be >= 0")
    if fidelity < spec.f_threshold:
        return 0.0
    if spec.app_type == "QKD":
        u = secret_key_rate(SkrParams(rate, spec.f_ec), qber_from_fidelity(fidelity))
    elif spec.app_type == "DQC":
        u = spec.value_per_pair * rate
    else:
        u = rate * math.exp(-spec.steepness * (1.0 - fidelity))
    return spec.weight * u


@dataclass
class AllocationEntry:
    plan: object
    share: float
    rate: float
    fidelity: float
    utility: float


@dataclass
class Allocation:
    entries: dict[str, AllocationEntry] = field(default_factory=dict)

    @property
    def total_utility(self) -> float:
        return math.fsum(e.utility for _, e in sorted(self.entries.items()))

    def utilities(self) -> dict[str, float]:
        return {rid: e.utility for rid, e in sorted(self.entries.items())}


# --- shared evaluation model -------------------------------------------------

class _Problem:
    """Candidate plans and a cached ``U(request, plan, share, occupancy)`` model.

    Both the optimizer and the exhaustive solver evaluate assignments
    through this object so they agree on every utility value.
    """

    def __init__(self, requests, topology, config):
        from . import control

        self.control = control
        self.topology = topology
        self.config = config
        self.requests = sorted(requests, key=lambda r: r.id)
        self.grid = int(round(1.0 / config.share_step))
        if abs(self.grid * config.share_step - 1.0) > 1e-9:
            raise BadParameter("share_step must divide 1")
        self.cands: list[list] = []
        for req in self.requests:
            plans = [p for p in control.plans_for(req, topology, config) if p.guard_ok]
            plans.sort(key=lambda p: p.sort_key())
            self.cands.append(plans)
        self.modes = [[p.modes_needed() for p in plans] for plans in self.cands]
        self.crosstalk = any(n.memory.crosstalk_chi > 0 for n in topology.nodes.values())
        self._cache: dict = {}

    def occupancy(self, choice) -> dict[str, int]:
        occ: dict[str, int] = {}
        for j, c in enumerate(choice):
            if c is None:
                continue
            for n, k in self.modes[j][c].items():
                occ[n] = occ.get(n, 0) + k
        return occ

    def feasible_modes(self, choice) -> bool:
        occ = self.occupancy(choice)
        return all(k <= self.topology.node(n).memory.num_modes for n, k in occ.items())

    def value(self, j: int, c: int, share: int, occ: dict | None) -> tuple[float, float, float]:
        plan = self.cands[j][c]
        own = self.control.default_occupancy(plan.path)
        for n in (plan.path.src, plan.path.dst):
            own[n] = 2**plan.purification_depth
        if self.crosstalk and occ is not None:
            path_occ = {n: max(occ.get(n, 0), own[n]) for n in plan.path.nodes}
        else:
            path_occ = own
        key = (j, c, share, tuple(sorted(path_occ.items())))
        hit = self._cache.get(key)
        if hit is None:
            r, f = self.control.score(plan.path, plan.purification_depth, plan.scheduling, self.topology,
                                      self.config, share / self.grid, path_occ)
            hit = (r, f, utility(self.requests[j].utility, r, f))
            self._cache[key] = hit
        return hit

    def upper(self, j: int, c: int) -> float:
        return self.value(j, c, self.grid, None)[2]

    def link_users(self, choice) -> dict[str, list[int]]:
        users: dict[str, list[int]] = {}
        for j, c in enumerate(choice):
            if c is None:
                continue
            for lid in self.cands[j][c].path.links:
                users.setdefault(lid, []).append(j)
        return users

    def key(self, choice, shares) -> tuple:
        out = []
        for j, c in enumerate(choice):
            if c is None:
                out.append((0,))
            else:
                out.append((1, self.cands[j][c].sort_key(), -shares[j]))
        return tuple(out)

    def allocation(self, choice, shares) -> Allocation:
        alloc = Allocation()
        occ = self.occupancy(choice)
        for j, c in enumerate(choice):
            if c is None:
                continue
            r, f, u = self.value(j, c, shares[j], occ)
            plan = self.cands[j][c]
            alloc.entries[self.requests[j].id] = AllocationEntry(plan, shares[j] / self.grid, r, f, u)
        return alloc

    def total(self, choice, shares) -> float:
        occ = self.occupancy(choice) if self.crosstalk else None
        vals = [self.value(j, c, shares[j], occ)[2] for j, c in enumerate(choice) if c is not None]
        return math.fsum(vals)


def _better(total, key, best_total, best_key) -> bool:
    return total > best_total or (total == best_total and (best_key is None or key < best_key))


def _maximal_share_vectors(members: list[int], users: dict[str, list[int]], grid: int):
    """Share vectors (in grid units) on which no single share can grow by one step."""
    constraints = [[m for m in us if m in members] for us in users.values() if len(us) > 1]
    free = [m for m in members if not any(m in c for c in constraints)]
    tight = [m for m in members if m not in free]
    for combo in itertools.product(range(1, grid + 1), repeat=len(tight)):
        s = dict(zip(tight, combo))
        if any(sum(s[m] for m in c) > grid for c in constraints):
            continue
        maximal = True
        for m in tight:
            if all(sum(s[x] for x in c) + 1 <= grid for c in constraints if m in c):
                maximal = False
                break
        if maximal:
            s.update({m: grid for m in free})
            yield s


def aggregate_optimize(requests, topology, config=None) -> Allocation:
    """Maximize ``sum_j U_j(R_j, F_j)`` over plans and link time shares.

    Requests that can never touch a common node are solved independently.
    Within a group a depth-first search assigns plans (or leaves a request
    unserved) with a bound from the unshared utilities; at each complete
    assignment only maximal share vectors are scored, which suffices
    because utility never decreases with share. Ties are broken by a
    canonical key (fewer served requests, then the plan order of
    :func:`~qnetsim.control.select_plan`, then larger shares).
    """
    from .control import ControllerConfig

    config = config or ControllerConfig()
    prob = _Problem(requests, topology, config)
    n = len(prob.requests)
    if n == 0:
        return Allocation()

    touch = [set().union(*(set(p.path.nodes) for p in plans)) if plans else set() for plans in prob.cands]
    groups: list[list[int]] = []
    seen: set[int] = set()
    for j in range(n):
        if j in seen:
            continue
        stack, comp = [j], []
        seen.add(j)
        while stack:
            a = stack.pop()
            comp.append(a)
            for b in range(n):
                if b not in seen and touch[a] & touch[b]:
                    seen.add(b)
                    stack.append(b)
        groups.append(sorted(comp))

    choice: list = [None] * n
    shares: list[int] = [0] * n
    for comp in groups:
        c_choice, c_shares = _solve_group(prob, comp)
        for j in comp:
            choice[j] = c_choice[j]
            shares[j] = c_shares[j]
    return prob.allocation(choice, shares)


def _solve_group(prob: _Problem, comp: list[int]):
    n = len(prob.requests)
    ub = {j: max((prob.upper(j, c) for c in range(len(prob.cands[j]))), default=0.0) for j in comp}
    best = {"total": -1.0, "key": None, "choice": None, "shares": None}
    choice: list = [None] * n

    def leaf():
        members = [j for j in comp if choice[j] is not None]
        users = prob.link_users(choice)
        for s in _maximal_share_vectors(members, users, prob.grid):
            shares = [s.get(j, 0) for j in range(n)]
            total = prob.total(choice, shares)
            sub_key = tuple(k for j, k in enumerate(prob.key(choice, shares)) if j in comp)
            if _better(total, sub_key, best["total"], best["key"]):
                best.update(total=total, key=sub_key, choice=list(choice), shares=shares)
        if not members:
            sub_key = tuple((0,) for _ in comp)
            if _better(0.0, sub_key, best["total"], best["key"]):
                best.update(total=0.0, key=sub_key, choice=list(choice), shares=[0] * n)

    def dfs(pos: int, bound_used: float):
        if pos == len(comp):
            leaf()
            return
        j = comp[pos]
        rest = math.fsum(ub[x] for x in comp[pos + 1:])
        for c in [None] + list(range(len(prob.cands[j]))):
            choice[j] = c
            if c is not None and not prob.feasible_modes(choice):
                continue
            gain = 0.0 if c is None else prob.upper(j, c)
            if c is not None and gain <= 0.0:
                continue
            if math.fsum([bound_used, gain, rest]) < best["total"]:
                continue
            dfs(pos + 1, bound_used + gain)
        choice[j] = None

    dfs(0, 0.0)
    return best["choice"], best["shares"]


def brute_force_allocation(requests, topology, config=None, max_nodes: int = 6, max_requests: int = 3) -> Allocation:
    """Exhaustive search over every plan choice and every share vector on the grid."""
    from .control import ControllerConfig

    config = config or ControllerConfig()
    if len(topology) > max_nodes or len(requests) > max_requests:
        raise InstanceTooLarge(f"brute force limited to {max_nodes} nodes and {max_requests} requests")
    if config.share_step < 0.1 - 1e-12:
        raise InstanceTooLarge("share grid step must be >= 0.1")
    prob = _Problem(requests, topology, config)
    n = len(prob.requests)
    if n == 0:
        return Allocation()
    grid = prob.grid
    best_total, best_key, best = -1.0, None, None
    options = [[None] + list(range(len(c))) for c in prob.cands]
    for choice in itertools.product(*options):
        choice = list(choice)
        if not prob.feasible_modes(choice):
            continue
        served = [j for j in range(n) if choice[j] is not None]
        if not served:
            key = prob.key(choice, [0] * n)
            if _better(0.0, key, best_total, best_key):
                best_total, best_key, best = 0.0, key, (choice, [0] * n)
            continue
        occ = prob.occupancy(choice) if prob.crosstalk else None
        table = np.array([[prob.value(j, choice[j], s, occ)[2] for s in range(1, grid + 1)] for j in served])
        users = prob.link_users(choice)
        mesh = np.meshgrid(*[np.arange(1, grid + 1)] * len(served), indexing="ij")
        ok = np.ones(mesh[0].shape, dtype=bool)
        for us in users.values():
            if len(us) > 1:
                ok &= sum(mesh[served.index(j)] for j in us) <= grid
        totals = sum(table[i][mesh[i] - 1] for i in range(len(served)))
        totals = np.where(ok, totals, -np.inf)
        top = totals.max()
        if top < best_total - 1e-9 * max(1.0, abs(best_total)):
            continue
        for idx in zip(*np.nonzero(totals >= top - 1e-9 * max(1.0, abs(top)))):
            shares = [0] * n
            for i, j in enumerate(served):
                shares[j] = int(mesh[i][idx])
            total = prob.total(choice, shares)
            key = prob.key(choice, shares)
            if _better(total, key, best_total, best_key):
                best_total, best_key, best = total, key, (list(choice), shares)
    return prob.allocation(*best)


@dataclass
class AdmissionResult:
    accepted: bool
    allocation: Allocation
    reason: str = ""


def admission_control(current: Allocation, new_request, requests: Sequence, topology, config=None) -> AdmissionResult:
    """Admit ``new_request`` only if the re-optimized network loses nothing.

    ``requests`` are the already admitted requests behind ``current``. The
    request is accepted iff it is served with positive utility, the total
    utility does not drop, and every admitted tenant keeps ``U > 0``.
    """
    from .control import ControllerConfig, plans_for

    config = config or ControllerConfig()
    alone = [p for p in plans_for(new_request, topology, config) if p.guard_ok]
    if not any(p.utility > 0 for p in alone):
        return AdmissionResult(False, current, "AllZeroUtility")
    proposal = aggregate_optimize(list(requests) + [new_request], topology, config)
    new_entry = proposal.entries.get(new_request.id)
    if new_entry is None or new_entry.utility <= 0:
        return AdmissionResult(False, current, "NoGain")
    for rid, entry in current.entries.items():
        if entry.utility > 0:
            kept = proposal.entries.get(rid)
            if kept is None or kept.utility <= 0:
                return AdmissionResult(False, current, "UtilityCollapse")
    if proposal.total_utility < current.total_utility:
        return AdmissionResult(False, current, "TotalUtilityDrop")
    return AdmissionResult(True, proposal, "")
