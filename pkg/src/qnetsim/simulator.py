"""Full discrete-event simulation of admitted flows.

Each admitted request becomes a :class:`Flow` that owns its reserved
memory modes and drives link generation, swaps, purification and delivery
through engine events. Asynchronous flows generate on every link whose two
end modes are free and swap as soon as two ready segments meet at a
repeater. Synchronous flows run lock-step slots and swap only when every
link heralds in the same slot. Control traffic (plan installation, swap
reports and commands, outcome notices, invalidations) travels as classical
messages with fiber delay unless the controller is an oracle.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .channels import CLASSICAL_LIMIT, memory_decay, pair_t2, qber_from_fidelity, t_non_eb
from .control import AllocationResult, ControllerConfig, Plan, Request, allocate, controller_node, plans_for
from .engine import Engine, EventKind
from .link_layer import (EntangledPair, PurificationFailure, herald_delay, photon_flight, run_purification,
                         sample_generation)
from .memory import NodeMemory, effective_t2
from .metrics import (Delivery, MetricsReport, SkrParams, effective_eps, plob_capacity, quantum_delay_breakdown,
                      secret_key_rate)
from .network_layer import SYNCHRONOUS, swap_at
from .qnum import utility

_GEN = "gen"
_BLOCKED = "blocked"


def _plob(eta: float) -> float:
    return math.inf if eta >= 1.0 else plob_capacity(eta)


@dataclass
class Segment:
    """A live pair held in two memory modes of one flow."""

    pair: EntangledPair
    lo: int
    hi: int
    modes: tuple[int, int]
    end_t2: tuple[float, float]
    end_fixed: tuple[float, float]
    end_auto: tuple[bool, bool]
    ready: bool = False
    swap_pending: bool = False
    alive: bool = True
    sweep: Optional[int] = None

    @property
    def t2(self) -> float:
        return pair_t2(*self.end_t2)

    @property
    def deadline(self) -> float:
        dl = min(self.end_fixed)
        if any(self.end_auto):
            dl = min(dl, self.pair.updated_at + t_non_eb(self.pair.fidelity, self.t2))
        return dl

    def fidelity_at(self, t: float) -> float:
        return memory_decay(self.pair.fidelity, max(0.0, t - self.pair.updated_at), self.t2)


class Flow:
    """Runtime state of one admitted plan."""

    def __init__(self, sim: "Simulation", request: Request, plan: Plan):
        self.sim = sim
        self.engine = sim.engine
        self.request = request
        self.plan = plan
        self.path = plan.path
        self.n = plan.path.n_hops
        self.depth = plan.purification_depth
        self.batch = 2**self.depth
        self.share = plan.time_share
        self.sync = plan.scheduling == SYNCHRONOUS and self.n > 1
        topo = sim.topology
        self.links = [topo.link(lid).params for lid in self.path.links]
        self.mems = [sim.memories[x] for x in self.path.nodes]
        self.modes = [list(plan.reserved_modes[x]) for x in self.path.nodes]
        self.state: dict[tuple[int, int], object] = {}
        for x, modes in enumerate(self.modes):
            for m in modes:
                self.state[(x, m)] = None
        self.gen_active = [False] * self.n
        self.installed = [False] * self.n
        self.attempts_since = [0] * self.n
        self.by_lo: dict[int, Segment] = {}
        self.by_hi: dict[int, Segment] = {}
        self.segments: dict[int, Segment] = {}
        self.buffer: list[Segment] = []
        self.purifying = False
        self.sync_active = False
        self.epoch = 0
        self.counters: Counter = Counter()
        self.deliveries: list[Delivery] = []
        self.link_attempts = [0] * self.n
        self.link_successes = [0] * self.n

    # -- helpers -----------------------------------------------------------

    @property
    def cfg(self) -> ControllerConfig:
        return self.sim.config

    def delay(self, a: int, b: int) -> float:
        return self.engine.classical_delay(self.path.nodes[a], self.path.nodes[b], self.sim.topology)

    def ctrl_delay(self, x: int) -> float:
        if self.cfg.oracle_controller:
            return 0.0
        return self.engine.classical_delay(self.path.nodes[x], self.sim.ctrl, self.sim.topology)

    def rng(self, node: str, purpose: str) -> np.random.Generator:
        return self.engine.stream(node, f"{purpose}:{self.request.id}")

    def _link_mode(self, i: int, end: int) -> Optional[int]:
        """Free mode that link ``i`` would use at its left (0) or right (1) end."""
        x = i + end
        if x == 0 or x == self.n:
            for m in self.modes[x]:
                if self.state[(x, m)] is None:
                    return m
            return None
        m = self.modes[x][0 if end == 1 else 1]
        return m if self.state[(x, m)] is None else None

    def _free(self, x: int, m: int) -> None:
        mem = self.mems[x]
        if mem.slots[m] is not None:
            mem.take(m)
        self.state[(x, m)] = None

    def _live_pairs(self) -> int:
        return sum(1 for s in self.segments.values() if s.alive)

    def _register(self, seg: Segment) -> None:
        self.segments[seg.pair.id] = seg
        self.by_lo[seg.lo] = seg
        self.by_hi[seg.hi] = seg
        for x, m in ((seg.lo, seg.modes[0]), (seg.hi, seg.modes[1])):
            self.state[(x, m)] = seg.pair.id

    def _unregister(self, seg: Segment) -> None:
        seg.alive = False
        self.segments.pop(seg.pair.id, None)
        if self.by_lo.get(seg.lo) is seg:
            del self.by_lo[seg.lo]
        if self.by_hi.get(seg.hi) is seg:
            del self.by_hi[seg.hi]
        if seg.sweep is not None:
            self.engine.cancel(seg.sweep)
            seg.sweep = None

    def _guarded(self, fn):
        epoch = self.epoch

        def handler(ev):
            if self.epoch == epoch:
                fn(ev)
        return handler

    # -- start-up ------------------------------------------------------------

    def install(self) -> None:
        """Ship the plan from the controller; each link starts once both ends hold it."""
        for i in range(self.n):
            t = max(self.ctrl_delay(i), self.ctrl_delay(i + 1))
            self.engine.at(self.engine.now + t, EventKind.CONTROL_MESSAGE, self._guarded(lambda ev, i=i: self._installed(i)),
                           {"msg": "install", "req": self.request.id, "link": self.path.links[i]},
                           self.path.nodes[i])

    def _installed(self, i: int) -> None:
        self.installed[i] = True
        self.kick(range(self.n))

    def kick(self, links) -> None:
        if self.sync:
            if all(self.installed):
                self._sync_round()
            return
        for i in links:
            if 0 <= i < self.n:
                self._start_link(i)

    # -- asynchronous generation ---------------------------------------------

    def _start_link(self, i: int) -> None:
        if self.gen_active[i] or not self.installed[i]:
            return
        ml, mr = self._link_mode(i, 0), self._link_mode(i, 1)
        if ml is None or mr is None:
            return
        self.gen_active[i] = True
        self.state[(i, ml)] = _GEN
        self.state[(i + 1, mr)] = _GEN
        self.engine.at(self.engine.now, EventKind.GENERATION_ATTEMPT,
                       self._guarded(lambda ev: self._generate(i, ml, mr)),
                       {"req": self.request.id, "link": self.path.links[i]}, self.path.nodes[i])

    def _generate(self, i: int, ml: int, mr: int) -> None:
        now = self.engine.now
        lk = self.links[i]
        quota = self.cfg.attempt_quota - self.attempts_since[i]
        out = sample_generation(lk, self.rng(self.path.links[i], "gen"), now,
                                (self.path.nodes[i], self.path.nodes[i + 1]), self.engine.v_fiber_km_s,
                                self.cfg.herald_model, self.share, quota, pair_id=self.sim.next_id())
        self.link_attempts[i] += out.attempts
        self.attempts_since[i] += out.attempts
        if not out.success:
            self.engine.at(out.herald_time, EventKind.HERALD_ARRIVAL, self._guarded(lambda ev: self.abort("quota")),
                           {"req": self.request.id, "link": self.path.links[i], "ok": False}, self.path.nodes[i])
            return
        self.engine.at(out.herald_time, EventKind.HERALD_ARRIVAL,
                       self._guarded(lambda ev: self._herald(i, ml, mr, out.pair)),
                       {"req": self.request.id, "link": self.path.links[i], "ok": True, "attempts": out.attempts,
                        "pair": out.pair.id}, self.path.nodes[i + 1])

    def _new_link_segment(self, i: int, ml: int, mr: int, pair: EntangledPair) -> Segment:
        now = self.engine.now
        self.counters["pairs_created"] += 1
        self.link_successes[i] += 1
        self.attempts_since[i] = 0
        ends = []
        for x, m in ((i, ml), (i + 1, mr)):
            mem = self.mems[x]
            t2 = effective_t2(mem.params, mem.occupancy() + 1)
            cut = mem.params.cutoff_s
            fixed = math.inf if cut == "auto" else pair.created_at + float(cut)
            ends.append((m, t2, fixed, cut == "auto"))
        seg = Segment(pair, i, i + 1, (ends[0][0], ends[1][0]), (ends[0][1], ends[1][1]),
                      (ends[0][2], ends[1][2]), (ends[0][3], ends[1][3]))
        fid = seg.fidelity_at(now)
        dl = seg.deadline
        for x, (m, _, _, _) in zip((i, i + 1), ends):
            self.mems[x].store(m, pair.id, now, fid, dl)
        self._register(seg)
        return seg

    def _herald(self, i: int, ml: int, mr: int, pair: EntangledPair) -> None:
        self.gen_active[i] = False
        seg = self._new_link_segment(i, ml, mr, pair)
        seg.ready = True
        if not self._arm_cutoff(seg):
            return
        if self.n == 1:
            self._end_to_end(seg)
        else:
            self._try_swaps((seg.lo, seg.hi))

    # -- cutoff ----------------------------------------------------------------

    def _arm_cutoff(self, seg: Segment) -> bool:
        """Schedule the deadline sweep; a pair already past it is discarded at once."""
        dl = seg.deadline
        if dl <= self.engine.now:
            self._discard(seg, "cutoff")
            return False
        if math.isfinite(dl):
            seg.sweep = self.engine.at(dl, EventKind.CUTOFF_SWEEP, self._guarded(lambda ev: self._sweep(seg)),
                                       {"req": self.request.id, "pair": seg.pair.id},
                                       self.path.nodes[seg.lo])
        return True

    def _sweep(self, seg: Segment) -> None:
        seg.sweep = None
        if seg.alive:
            self._discard(seg, "cutoff")

    def _discard(self, seg: Segment, cause: str) -> None:
        """Both ends drop the pair at the pair-level deadline; modes free once the far end is told."""
        if seg in self.buffer:
            self.buffer.remove(seg)
        self._unregister(seg)
        self.counters["discarded_cutoff"] += 1
        for x, m in ((seg.lo, seg.modes[0]), (seg.hi, seg.modes[1])):
            if self.mems[x].slots[m] is not None:
                self.mems[x].take(m)
                self.mems[x].discards[cause] += 1
            self.state[(x, m)] = _BLOCKED
        notice = self.delay(seg.lo, seg.hi)
        self.engine.at(self.engine.now + notice, EventKind.CONTROL_MESSAGE,
                       self._guarded(lambda ev: self._release_after_notice(seg)),
                       {"msg": "invalidate", "req": self.request.id, "pair": seg.pair.id},
                       self.path.nodes[seg.hi])

    def _release_after_notice(self, seg: Segment) -> None:
        for x, m in ((seg.lo, seg.modes[0]), (seg.hi, seg.modes[1])):
            self._free(x, m)
        self.kick((seg.lo - 1, seg.lo, seg.hi - 1, seg.hi))

    # -- swapping --------------------------------------------------------------

    def _try_swaps(self, nodes) -> None:
        for x in nodes:
            if not 0 < x < self.n:
                continue
            left, right = self.by_hi.get(x), self.by_lo.get(x)
            if left is None or right is None:
                continue
            if not (left.ready and right.ready) or left.swap_pending or right.swap_pending:
                continue
            left.swap_pending = right.swap_pending = True
            self._request_swap(x, left, right)

    def _request_swap(self, x: int, left: Segment, right: Segment) -> None:
        node = self.path.nodes[x]
        payload = {"req": self.request.id, "repeater": node, "pairs": (left.pair.id, right.pair.id)}
        fire = self._guarded(lambda ev: self._swap(x, left, right))
        d = self.ctrl_delay(x)
        if d == 0.0:
            self.engine.at(self.engine.now, EventKind.SWAP_TRIGGER, fire, payload, node)
            return

        def command(ev):
            self.engine.at(self.engine.now + d, EventKind.CONTROL_MESSAGE,
                           self._guarded(lambda ev2: self.engine.at(self.engine.now, EventKind.SWAP_TRIGGER, fire,
                                                                    payload, node)),
                           dict(payload, msg="swap-command"), node)

        self.engine.at(self.engine.now + d, EventKind.CONTROL_MESSAGE, self._guarded(command),
                       dict(payload, msg="swap-report"), self.sim.ctrl)

    def _swap(self, x: int, left: Segment, right: Segment) -> None:
        now = self.engine.now
        for seg in (left, right):
            if seg.alive and now >= seg.deadline:
                self._discard(seg, "cutoff")
        if not (left.alive and right.alive):
            for seg in (left, right):
                seg.swap_pending = False
            self._try_swaps((left.lo, right.hi))
            return
        pa = replace(left.pair, fidelity=left.fidelity_at(now), updated_at=now)
        pb = replace(right.pair, fidelity=right.fidelity_at(now), updated_at=now)
        node = self.path.nodes[x]
        res = swap_at(node, pa, pb, self.sim.topology.node(node).noise, self.rng(node, "swap"), now,
                      self.cfg.jitter_mode, pair_id=self.sim.next_id())
        self._unregister(left)
        self._unregister(right)
        self.counters["consumed_swap"] += 2
        self._free(x, left.modes[1])
        self._free(x, right.modes[0])
        if not res.success:
            self.counters["swaps_failed"] += 1
            self._swap_failed(x, left, right)
            return
        self.counters["swaps_ok"] += 1
        self.counters["pairs_created"] += 1
        seg = Segment(res.out_pair, left.lo, right.hi, (left.modes[0], right.modes[1]),
                      (left.end_t2[0], right.end_t2[1]), (left.end_fixed[0], right.end_fixed[1]),
                      (left.end_auto[0], right.end_auto[1]))
        self._register(seg)
        for xx, m in ((seg.lo, seg.modes[0]), (seg.hi, seg.modes[1])):
            half = self.mems[xx].slots[m]
            half.pair_id = seg.pair.id
            half.deadline = seg.deadline
        self.kick((x - 1, x))
        if not self._arm_cutoff(seg):
            return
        notice = max(self.delay(x, seg.lo), self.delay(x, seg.hi))
        self.engine.at(now + notice, EventKind.MEASUREMENT_RESULT, self._guarded(lambda ev: self._swap_known(seg)),
                       {"req": self.request.id, "repeater": node, "ok": True, "bits": res.correction_bits,
                        "pair": seg.pair.id}, self.path.nodes[seg.hi])

    def _swap_known(self, seg: Segment) -> None:
        if not seg.alive:
            return
        seg.ready = True
        if seg.lo == 0 and seg.hi == self.n:
            self._end_to_end(seg)
        else:
            self._try_swaps((seg.lo, seg.hi))

    def _swap_failed(self, x: int, left: Segment, right: Segment) -> None:
        now = self.engine.now
        for xx, m in ((left.lo, left.modes[0]), (right.hi, right.modes[1])):
            self.state[(xx, m)] = _BLOCKED
            self.engine.at(now + self.delay(x, xx), EventKind.MEASUREMENT_RESULT,
                           self._guarded(lambda ev, xx=xx, m=m: self._outer_released(xx, m)),
                           {"req": self.request.id, "repeater": self.path.nodes[x], "ok": False},
                           self.path.nodes[xx])
        self.kick((x - 1, x))

    def _outer_released(self, x: int, m: int) -> None:
        self._free(x, m)
        self.kick((x - 1, x))

    # -- synchronous rounds ----------------------------------------------------

    def _slot_length(self) -> float:
        return max(lk.attempt_period_s / self.share for lk in self.links)

    def _sync_draw(self, limit: float):
        """Slots until every link heralds in the same slot, and link successes in the failed slots."""
        rng = self.rng(self.path.nodes[0], "sync-slots")
        p = np.array([lk.p_gen for lk in self.links])
        p_all = float(np.prod(p))
        chunk = int(min(1 << 16, max(64, 2.0 / p_all)))
        slots = 0
        wasted = np.zeros(self.n, dtype=np.int64)
        while True:
            ok = rng.random((chunk, self.n)) < p
            hit = np.flatnonzero(ok.all(axis=1))
            first = int(hit[0]) if hit.size else chunk
            if slots + first + 1 > limit:
                take = int(limit - slots)
                wasted += ok[:take].sum(axis=0)
                return None, int(limit), wasted
            wasted += ok[:first].sum(axis=0)
            slots += first
            if hit.size:
                return slots + 1, slots + 1, wasted
            # no joint success in this chunk; keep drawing

    def _sync_round(self) -> None:
        if self.sync_active:
            return
        ends = []
        for i in range(self.n):
            ml, mr = self._link_mode(i, 0), self._link_mode(i, 1)
            if ml is None or mr is None:
                return
            ends.append((ml, mr))
        # both endpoint modes must be distinct per link; pools only feed links 0 and n-1
        self.sync_active = True
        now = self.engine.now
        for i, (ml, mr) in enumerate(ends):
            self.state[(i, ml)] = _GEN
            self.state[(i + 1, mr)] = _GEN
        k, used, wasted = self._sync_draw(self.cfg.attempt_quota)
        for i in range(self.n):
            self.link_attempts[i] += used
        self.counters["pairs_created"] += int(wasted.sum())
        self.counters["discarded_cutoff"] += int(wasted.sum())
        for i, w in enumerate(wasted):
            self.link_successes[i] += int(w)
            if w:
                self.mems[i].discards["sync-slot"] += int(w)
                self.mems[i + 1].discards["sync-slot"] += int(w)
        self.engine.at(now, EventKind.GENERATION_ATTEMPT, None, {"req": self.request.id, "slots": used},
                       self.path.nodes[0])
        slot = self._slot_length()
        if k is None:
            known = now + used * slot + max(herald_delay(lk, self.engine.v_fiber_km_s, self.cfg.herald_model)
                                            for lk in self.links)
            self.engine.at(known, EventKind.HERALD_ARRIVAL, self._guarded(lambda ev: self.abort("quota")),
                           {"req": self.request.id, "ok": False}, self.path.nodes[0])
            return
        v = self.engine.v_fiber_km_s
        segs: list[Optional[Segment]] = [None] * self.n
        last = 0.0
        for i, lk in enumerate(self.links):
            period = lk.attempt_period_s / self.share
            emit = now + (k - 1) * slot + period
            herald = emit + herald_delay(lk, v, self.cfg.herald_model)
            last = max(last, herald)
            pair = EntangledPair(self.sim.next_id(), (self.path.nodes[i], self.path.nodes[i + 1]), lk.f0_link, emit,
                                 herald_time=herald, cycle_start=now, generation_s=period,
                                 transmission_s=photon_flight(lk, v, self.cfg.herald_model))

            def on_herald(ev, i=i, pair=pair):
                segs[i] = self._new_link_segment(i, ends[i][0], ends[i][1], pair)
                segs[i].ready = True

            self.engine.at(herald, EventKind.HERALD_ARRIVAL, self._guarded(on_herald),
                           {"req": self.request.id, "link": self.path.links[i], "ok": True, "pair": pair.id},
                           self.path.nodes[i + 1])
        rtt = 0.0 if self.cfg.oracle_controller else max(2.0 * self.ctrl_delay(x) for x in range(1, self.n))
        self.engine.at(last + rtt, EventKind.SWAP_TRIGGER, self._guarded(lambda ev: self._sync_swap(segs)),
                       {"req": self.request.id, "repeaters": self.path.repeaters}, self.path.nodes[1])

    def _sync_swap(self, segs: list[Segment]) -> None:
        now = self.engine.now
        notify = max(max(self.delay(x, 0), self.delay(x, self.n)) for x in range(1, self.n))
        expired = [s for s in segs if now >= s.deadline]
        if expired:
            for s in segs:
                self._unregister(s)
                if s in expired:
                    self.counters["discarded_cutoff"] += 1
                    for x, m in ((s.lo, s.modes[0]), (s.hi, s.modes[1])):
                        if self.mems[x].slots[m] is not None:
                            self.mems[x].discards["cutoff"] += 1
                else:
                    self.counters["invalidated_partner"] += 1
                for x, m in ((s.lo, s.modes[0]), (s.hi, s.modes[1])):
                    self._free(x, m)
            self.engine.at(now + notify, EventKind.MEASUREMENT_RESULT, self._guarded(lambda ev: self._sync_done(None)),
                           {"req": self.request.id, "ok": False, "cause": "cutoff"}, self.path.nodes[0])
            return
        cur = replace(segs[0].pair, fidelity=segs[0].fidelity_at(now), updated_at=now)
        ok = True
        for x in range(1, self.n):
            nxt = replace(segs[x].pair, fidelity=segs[x].fidelity_at(now), updated_at=now)
            node = self.path.nodes[x]
            res = swap_at(node, cur, nxt, self.sim.topology.node(node).noise, self.rng(node, "swap"), now,
                          self.cfg.jitter_mode, pair_id=self.sim.next_id())
            self.counters["consumed_swap"] += 2
            if not res.success:
                self.counters["swaps_failed"] += 1
                self.counters["consumed_swap"] += self.n - 1 - x
                ok = False
                break
            self.counters["swaps_ok"] += 1
            self.counters["pairs_created"] += 1
            cur = res.out_pair
        for s in segs:
            self._unregister(s)
        for x in range(1, self.n):
            for m in self.modes[x]:
                self._free(x, m)
        if not ok:
            for x, m in ((0, segs[0].modes[0]), (self.n, segs[-1].modes[1])):
                if self.mems[x].slots[m] is not None:
                    self.mems[x].take(m)
                self.state[(x, m)] = _BLOCKED
            self.engine.at(now + notify, EventKind.MEASUREMENT_RESULT,
                           self._guarded(lambda ev: self._sync_done(None, segs)),
                           {"req": self.request.id, "ok": False}, self.path.nodes[0])
            return
        first, lastseg = segs[0], segs[-1]
        seg = Segment(cur, 0, self.n, (first.modes[0], lastseg.modes[1]), (first.end_t2[0], lastseg.end_t2[1]),
                      (first.end_fixed[0], lastseg.end_fixed[1]), (first.end_auto[0], lastseg.end_auto[1]))
        self._register(seg)
        for x, m in ((0, seg.modes[0]), (self.n, seg.modes[1])):
            half = self.mems[x].slots[m]
            half.pair_id = seg.pair.id
            half.deadline = seg.deadline
        if not self._arm_cutoff(seg):
            self.sync_active = False
            return
        self.engine.at(now + notify, EventKind.MEASUREMENT_RESULT, self._guarded(lambda ev: self._sync_done(seg)),
                       {"req": self.request.id, "ok": True, "pair": seg.pair.id}, self.path.nodes[self.n])

    def _sync_done(self, seg: Optional[Segment], failed: list[Segment] | None = None) -> None:
        self.sync_active = False
        if failed is not None:
            for x, m in ((0, failed[0].modes[0]), (self.n, failed[-1].modes[1])):
                self._free(x, m)
        if seg is not None and seg.alive:
            seg.ready = True
            self._end_to_end(seg)
        self.kick(())

    # -- end-to-end handling ---------------------------------------------------

    def _end_to_end(self, seg: Segment) -> None:
        if self.engine.now >= seg.deadline:
            self._discard(seg, "cutoff")
            return
        if self.depth == 0:
            self._unregister(seg)
            self._deliver(seg.pair, seg.fidelity_at(self.engine.now))
            for x, m in ((seg.lo, seg.modes[0]), (seg.hi, seg.modes[1])):
                self._free(x, m)
            self.kick((0, self.n - 1))
            return
        self.buffer.append(seg)
        self._maybe_purify()
        self.kick((0, self.n - 1))

    def _maybe_purify(self) -> None:
        if self.purifying or len(self.buffer) < self.batch:
            return
        now = self.engine.now
        batch, self.buffer = self.buffer[: self.batch], self.buffer[self.batch:]
        pairs = []
        for seg in batch:
            self._unregister(seg)
            pairs.append(replace(seg.pair, fidelity=seg.fidelity_at(now), updated_at=now))
        t2 = min(s.t2 for s in batch)
        rtt = 2.0 * self.delay(0, self.n)
        self.counters["consumed_purify"] += self.batch
        self.purifying = True
        out = run_purification(pairs, self.depth, None, self.rng(self.path.src, "purify"), now, rtt,
                               decay=lambda f, dt: memory_decay(f, dt, t2), pair_id=self.sim.next_id())
        done = out.time if isinstance(out, PurificationFailure) else out.created_at
        auto = any(any(s.end_auto) for s in batch)
        self.engine.at(done, EventKind.PURIFY_TRIGGER, self._guarded(lambda ev: self._purified(batch, out, auto)),
                       {"req": self.request.id, "depth": self.depth,
                        "ok": not isinstance(out, PurificationFailure)}, self.path.src)

    def _purified(self, batch: list[Segment], out, auto: bool) -> None:
        self.purifying = False
        for seg in batch:
            for x, m in ((seg.lo, seg.modes[0]), (seg.hi, seg.modes[1])):
                self._free(x, m)
        if isinstance(out, PurificationFailure):
            self.counters["purify_failed"] += 1
        else:
            self.counters["purify_ok"] += 1
            self.counters["pairs_created"] += 1
            if auto and out.fidelity <= CLASSICAL_LIMIT:
                self.counters["discarded_cutoff"] += 1
            else:
                self._deliver(out, out.fidelity)
        self._maybe_purify()
        self.kick((0, self.n - 1))

    def _deliver(self, pair: EntangledPair, fidelity: float) -> None:
        now = self.engine.now
        self.counters["delivered"] += 1
        self.deliveries.append(Delivery(self.request.id, now, fidelity, pair.hops_composed, pair.cycle_start,
                                        pair.generation_s, pair.transmission_s))

    # -- quota abort -------------------------------------------------------------

    def abort(self, cause: str) -> None:
        """Drop everything the flow holds and re-admit after a controller round trip."""
        self.counters["aborts"] += 1
        for seg in list(self.segments.values()):
            self._unregister(seg)
            self.counters["invalidated_partner"] += 1
        self.buffer = []
        for (x, m) in list(self.state):
            self._free(x, m)
        self.epoch += 1
        self.purifying = False
        self.sync_active = False
        self.gen_active = [False] * self.n
        self.attempts_since = [0] * self.n
        self.installed = [False] * self.n
        self.install_delay = max(2.0 * self.ctrl_delay(x) for x in range(self.n + 1))
        self.engine.at(self.engine.now + self.install_delay, EventKind.CONTROL_MESSAGE,
                       self._guarded(lambda ev: self.install()), {"msg": "readmit", "req": self.request.id,
                                                                  "cause": cause}, self.sim.ctrl)

    # -- reporting -----------------------------------------------------------------

    def report(self, replication: int, seed: int, duration: float) -> MetricsReport:
        req, plan = self.request, self.plan
        fids = [d.fidelity for d in self.deliveries]
        n_del = len(fids)
        eps = n_del / duration
        f_mean = math.fsum(fids) / n_del if n_del else 0.0
        qber = qber_from_fidelity(f_mean) if n_del else 0.5
        f_ec = req.utility.f_ec
        skr = secret_key_rate(SkrParams(eps, f_ec), qber) if n_del else 0.0
        delays = [quantum_delay_breakdown(d) for d in self.deliveries]
        ps = [self.sim.topology.node(x).noise.effective_p_swap(self.cfg.jitter_mode) for x in self.path.repeaters]
        p_swap = math.prod(ps) ** (1.0 / len(ps)) if ps else 1.0
        eta = math.prod(lk.p_gen for lk in self.links) ** (1.0 / self.n)
        egr = self.share * min(lk.attempt_rate_hz for lk in self.links)
        worst = min(range(self.n), key=lambda i: (self.links[i].eta, i))
        attempts = self.link_attempts[worst]
        in_mem = self._live_pairs()
        c = self.counters

        def mean(xs):
            return math.fsum(xs) / len(xs) if xs else 0.0

        return MetricsReport(
            replication=replication, seed=seed, request_id=req.id, app_type=req.app_type, src=req.src,
            dst=req.dst, admitted=True, reason="", path=self.path.label(), n_hops=self.n, depth=self.depth,
            scheduling=plan.scheduling, r_est=plan.r_est, f_est=plan.f_est, delivered=n_del, effective_eps=eps,
            eps_formula=effective_eps(egr, p_swap, self.n, eta, float(self.batch)),
            fidelity_mean=f_mean, fidelity_min=min(fids) if fids else 0.0, qber=qber, skr_bits_per_s=skr,
            utility=utility(req.utility, eps, f_mean) if n_del else 0.0,
            mean_quantum_delay_s=mean([d.total for d in delays]),
            mean_transmission_s=mean([d.transmission for d in delays]),
            mean_generation_s=mean([d.generation for d in delays]),
            mean_protocol_s=mean([d.protocol for d in delays]),
            link_attempts=sum(self.link_attempts),
            per_use_rate=(n_del / attempts) if attempts else 0.0,
            plob_bound=_plob(self.links[worst].eta),
            pairs_created=c["pairs_created"], swaps_ok=c["swaps_ok"], swaps_failed=c["swaps_failed"],
            purify_ok=c["purify_ok"], purify_failed=c["purify_failed"], discarded_cutoff=c["discarded_cutoff"],
            invalidated_partner=c["invalidated_partner"], consumed_swap=c["consumed_swap"],
            consumed_purify=c["consumed_purify"], in_memory_at_end=in_mem,
        )

    def conservation(self) -> dict:
        c = self.counters
        live = self._live_pairs()
        out = (c["consumed_swap"] + c["consumed_purify"] + c["delivered"] + c["discarded_cutoff"]
               + c["invalidated_partner"] + live)
        return {"created": c["pairs_created"], "accounted": out, "balanced": c["pairs_created"] == out}


@dataclass
class SimulationResult:
    reports: list[MetricsReport]
    allocation: AllocationResult
    deliveries: dict[str, list[Delivery]]
    node_stats: list[dict]
    conservation: dict[str, dict]
    log: object = None
    events: int = 0


def allocation_from_qnum(requests, topology, config: ControllerConfig) -> AllocationResult:
    """Run the utility optimizer and turn its choice into reserved plans."""
    from .control import _decision_rows, _reject_reason
    from .qnum import aggregate_optimize

    alloc = aggregate_optimize(requests, topology, config)
    memories = {n: NodeMemory(n, node.memory) for n, node in topology.nodes.items()}
    result = AllocationResult({}, {}, [])
    for req in sorted(requests, key=lambda r: r.id):
        plans = plans_for(req, topology, config)
        entry = alloc.entries.get(req.id)
        chosen = None
        if entry is not None and entry.utility > 0:
            chosen = replace(entry.plan, request_id=req.id, time_share=entry.share, r_est=entry.rate,
                             f_est=entry.fidelity, utility=entry.utility)
            chosen.reserved_modes = {n: [memories[n].reserve_mode(req.id) for _ in range(k)]
                                     for n, k in sorted(chosen.modes_needed().items())}
            result.plans[req.id] = chosen
            result.shares[req.id] = entry.share
        else:
            viable = [p for p in plans if p.guard_ok and p.utility > 0]
            result.rejections[req.id] = "NotSelected" if viable else _reject_reason(plans)
        result.decisions.extend(_decision_rows(req, plans, None))
        if chosen is not None:
            result.decisions.append({
                "request_id": req.id, "candidate": -1, "path": chosen.path.label(),
                "depth": chosen.purification_depth, "scheduling": chosen.scheduling, "r_est": chosen.r_est,
                "f_est": chosen.f_est, "utility": chosen.utility, "charged_wait_s": chosen.charged_wait_s,
                "lifetime_s": chosen.lifetime_s, "guard_ok": chosen.guard_ok, "chosen": True,
            })
    return result


class Simulation:
    """One replication: allocate, install plans, run the event loop, report.

    Args:
        allocator: ``"greedy"`` for :func:`~qnetsim.control.allocate` under
            the configured policy, ``"qnum"`` for the utility optimizer.
    """

    def __init__(self, topology, requests, config: ControllerConfig | None = None, duration_s: float = 1.0,
                 root_seed: int = 0, allocator: str = "greedy", keep_log: bool = True, replication: int = 0,
                 min_latency_s: float = 0.0):
        self.topology = topology
        self.requests = list(requests)
        self.config = config or ControllerConfig()
        if duration_s <= 0:
            raise ValueError("duration must be > 0")
        self.duration_s = float(duration_s)
        self.root_seed = int(root_seed)
        self.replication = replication
        self.allocator = allocator
        self.engine = Engine(root_seed, self.config.v_fiber_km_s, min_latency_s, topology, keep_log)
        self.memories = {n: NodeMemory(n, node.memory) for n, node in sorted(topology.nodes.items())}
        self.ctrl = controller_node(topology, self.config)
        self._ids = itertools.count()
        self.flows: dict[str, Flow] = {}

    def next_id(self) -> int:
        return next(self._ids)

    def allocate(self) -> AllocationResult:
        if self.allocator == "qnum":
            return allocation_from_qnum(self.requests, self.topology, self.config)
        if self.allocator != "greedy":
            raise ValueError(f"unknown allocator {self.allocator!r}")
        return allocate(self.requests, self.topology, self.config)

    def run(self) -> SimulationResult:
        alloc = self.allocate()
        for req in sorted(self.requests, key=lambda r: r.id):
            plan = alloc.plans.get(req.id)
            if plan is None:
                continue
            for node, modes in plan.reserved_modes.items():
                for m in modes:
                    self.memories[node].owner[m] = req.id
            flow = Flow(self, req, plan)
            self.flows[req.id] = flow
            flow.install()
        self.engine.run_until(self.duration_s)
        reports = []
        for req in sorted(self.requests, key=lambda r: r.id):
            flow = self.flows.get(req.id)
            if flow is None:
                reports.append(MetricsReport(self.replication, self.root_seed, req.id, req.app_type, req.src,
                                             req.dst, False, alloc.rejections.get(req.id, "Rejected")))
            else:
                reports.append(flow.report(self.replication, self.root_seed, self.duration_s))
        return SimulationResult(
            reports=reports,
            allocation=alloc,
            deliveries={rid: f.deliveries for rid, f in self.flows.items()},
            node_stats=[m.stats() for _, m in sorted(self.memories.items())],
            conservation={rid: f.conservation() for rid, f in sorted(self.flows.items())},
            log=self.engine.log,
            events=self.engine.processed,
        )


def simulate(topology, requests, config: ControllerConfig | None = None, duration_s: float = 1.0,
             root_seed: int = 0, **kw) -> SimulationResult:
    return Simulation(topology, requests, config, duration_s, root_seed, **kw).run()
