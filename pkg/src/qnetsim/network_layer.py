"""Entanglement swapping and end-to-end path estimators."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .channels import decay_both_halves, swap_fidelity
from .engine import V_FIBER_KM_S
from .errors import BadParameter, NoPath, WrongEndpoints
from .link_layer import EntangledPair, new_pair_id
from .memory import effective_t2

SYNCHRONOUS = "synchronous"
ASYNCHRONOUS = "asynchronous"
SCHEDULING_MODES = (SYNCHRONOUS, ASYNCHRONOUS)


@dataclass(frozen=True)
class Path:
    nodes: tuple[str, ...]
    links: tuple[str, ...]

    def __post_init__(self):
        if len(self.nodes) < 2 or len(self.links) != len(self.nodes) - 1:
            raise BadParameter("a path needs >= 2 nodes and one link per hop")
        if len(set(self.nodes)) != len(self.nodes):
            raise BadParameter(f"path {self.nodes} repeats a node")

    @property
    def n_hops(self) -> int:
        return len(self.links)

    @property
    def src(self) -> str:
        return self.nodes[0]

    @property
    def dst(self) -> str:
        return self.nodes[-1]

    @property
    def repeaters(self) -> tuple[str, ...]:
        return self.nodes[1:-1]

    @classmethod
    def from_nodes(cls, topology, nodes: Sequence[str]) -> "Path":
        nodes = tuple(nodes)
        links = []
        for u, v in zip(nodes, nodes[1:]):
            try:
                links.append(topology.link_between(u, v).id)
            except NoPath:
                raise BadParameter(f"{u} and {v} are not adjacent") from None
        return cls(nodes, tuple(links))

    def label(self) -> str:
        return ">".join(self.nodes)


@dataclass
class SwapResult:
    success: bool
    out_pair: Optional[EntangledPair]
    correction_bits: tuple[int, int]


def _outer(pair: EntangledPair, repeater: str) -> str:
    a, b = pair.endpoints
    if a == repeater:
        return b
    if b == repeater:
        return a
    raise WrongEndpoints(f"pair {pair.id} {pair.endpoints} does not end at {repeater}")


def swap_at(repeater: str, pair_a: EntangledPair, pair_b: EntangledPair, noise, rng: np.random.Generator,
            now: float | None = None, jitter_mode: str = "smooth", pair_id: int | None = None) -> SwapResult:
    """Bell measurement at ``repeater`` joining ``pair_a`` and ``pair_b``.

    Fidelities must already be decayed to ``now``. Both inputs are consumed
    whatever the outcome; on success the returned pair spans the two outer
    nodes. Corrections are Pauli-frame updates, so ``correction_bits`` are
    informational.
    """
    left = _outer(pair_a, repeater)
    right = _outer(pair_b, repeater)
    if left == right:
        raise WrongEndpoints("swap would join a node to itself")
    p_ok = noise.effective_p_swap(jitter_mode)
    ok = rng.random() < p_ok
    bits = (int(rng.integers(2)), int(rng.integers(2)))
    if not ok:
        return SwapResult(False, None, bits)
    t = max(pair_a.updated_at, pair_b.updated_at) if now is None else now
    f = swap_fidelity(pair_a.fidelity, pair_b.fidelity, noise.p_gate_depol)
    out = EntangledPair(
        new_pair_id() if pair_id is None else pair_id, (left, right), f, t, pair_a.hops_composed + pair_b.hops_composed,
        herald_time=t, updated_at=t, constituents=pair_a.constituents + pair_b.constituents,
        cycle_start=min(pair_a.cycle_start, pair_b.cycle_start),
        generation_s=max(pair_a.generation_s, pair_b.generation_s),
        transmission_s=max(pair_a.transmission_s, pair_b.transmission_s),
    )
    return SwapResult(True, out, bits)


def chain_success_probability(p_links: Sequence[float], p_swap, n: int | None = None) -> float:
    """Single-shot success of an ``n``-hop synchronous chain.

    ``prod(p_links) * p_swap^(n-1)``; ``p_swap`` may also be a sequence with
    one entry per repeater.
    """
    p_links = list(p_links)
    n = len(p_links) if n is None else n
    if n != len(p_links) or n < 1:
        raise BadParameter("need one link probability per hop and n >= 1")
    prob = math.prod(p_links)
    if isinstance(p_swap, (int, float)):
        return prob * float(p_swap) ** (n - 1)
    p_swap = list(p_swap)
    if len(p_swap) != n - 1:
        raise BadParameter("need one swap probability per repeater")
    return prob * math.prod(p_swap)


def expected_max_geometric(p1: float, p2: float) -> float:
    """``E[max(G1, G2)]`` for independent geometric slot counts."""
    return 1.0 / p1 + 1.0 / p2 - 1.0 / (p1 + p2 - p1 * p2)


def async_two_link_slots(p: float, p2: float | None = None, p_swap: float = 1.0) -> float:
    """Expected slots to deliver over two asynchronously generated links.

    With equal probabilities this is ``2/p - 1/(2p - p^2)``; a failed swap
    restarts both links.
    """
    p2 = p if p2 is None else p2
    return expected_max_geometric(p, p2) / p_swap


def stable_seed(*parts) -> int:
    text = "|".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


@lru_cache(maxsize=4096)
def _async_mc(p_links: tuple, p_swaps: tuple, trials: int, seed: int):
    mean_slots, waits, _ = kernels.async_chain_trials(p_links, p_swaps, trials, seed)
    return mean_slots, tuple(float(w) for w in waits)


@dataclass(frozen=True)
class PathEstimate:
    rate: float
    fidelity: float
    slot_rate: float
    expected_slots: float
    wait_s: tuple[float, ...] = ()


def default_occupancy(path: Path) -> dict[str, int]:
    occ = {n: 2 for n in path.repeaters}
    occ[path.src] = 1
    occ[path.dst] = 1
    return occ


def estimate_path(path: Path, policy: str, topology, *, share: float = 1.0, jitter_mode: str = "smooth",
                  occupancy: dict[str, int] | None = None, mc_trials: int = 20000,
                  detail: bool = False):
    """Analytic rate and fidelity of one end-to-end pair stream over ``path``.

    Synchronous: ``slot_rate * chain success`` and a plain swap fold of the
    link fidelities (nothing waits in memory). Asynchronous: slots per
    delivery from the closed form for two hops or Monte Carlo beyond, with
    the expected per-link waiting charged as memory decay. The slot rate is
    the slowest link's attempt rate times ``share`` (herald dead time is
    ignored, as in :func:`~qnetsim.link_layer.expected_link_rate`).

    Returns ``(R_est, F_est)``, or a :class:`PathEstimate` when ``detail``.
    """
    if policy not in SCHEDULING_MODES:
        raise BadParameter(f"unknown scheduling mode {policy!r}")
    if not 0.0 < share <= 1.0:
        raise BadParameter("share must be in (0, 1]")
    links = [topology.link(lid).params for lid in path.links]
    p = [lk.p_gen for lk in links]
    slot_rate = share * min(lk.attempt_rate_hz for lk in links)
    reps = path.repeaters
    ps = [topology.node(r).noise.effective_p_swap(jitter_mode) for r in reps]
    gates = [topology.node(r).noise.p_gate_depol for r in reps]
    n = path.n_hops

    if policy == SYNCHRONOUS or n == 1:
        prob = chain_success_probability(p, ps)
        fid = links[0].f0_link
        for i in range(1, n):
            fid = swap_fidelity(fid, links[i].f0_link, gates[i - 1])
        rate = slot_rate * prob
        est = PathEstimate(rate, fid, slot_rate, 1.0 / prob if prob > 0 else math.inf, tuple([0.0] * n))
        return est if detail else (est.rate, est.fidelity)

    occupancy = occupancy or default_occupancy(path)
    if n == 2:
        slots = async_two_link_slots(p[0], p[1], ps[0])
        emax = expected_max_geometric(p[0], p[1])
        waits = (emax - 1.0 / p[0], emax - 1.0 / p[1])
    else:
        seed = stable_seed("async", tuple(p), tuple(ps), mc_trials)
        slots, waits = _async_mc(tuple(p), tuple(ps), int(mc_trials), seed)
    wait_s = tuple(w / slot_rate for w in waits)
    fids = []
    for i, lk in enumerate(links):
        u, v = path.nodes[i], path.nodes[i + 1]
        t2u = effective_t2(topology.node(u).memory, occupancy.get(u, 1))
        t2v = effective_t2(topology.node(v).memory, occupancy.get(v, 1))
        fids.append(decay_both_halves(lk.f0_link, wait_s[i], t2u, t2v))
    fid = fids[0]
    for i in range(1, n):
        fid = swap_fidelity(fid, fids[i], gates[i - 1])
    est = PathEstimate(slot_rate / slots, fid, slot_rate, slots, wait_s)
    return est if detail else (est.rate, est.fidelity)


def classical_path_delay(topology, nodes: Sequence[str], v_fiber_km_s: float = V_FIBER_KM_S) -> float:
    """Sum of per-hop fiber delays along ``nodes``."""
    return sum(topology.link_between(u, v).params.length_km / v_fiber_km_s for u, v in zip(nodes, nodes[1:]))
