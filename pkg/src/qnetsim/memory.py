"""Multimode quantum memory: mode reservation, timed storage and cutoffs."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Union

from .channels import memory_decay, t_non_eb
from .errors import BadParameter, MemoryFull

Cutoff = Union[float, str]


@dataclass(frozen=True)
class MemoryParams:
    """Per-node memory hardware.

    ``t1_s`` is carried for validation only; fidelity decay uses ``t2_s``.
    ``cutoff_s`` is a fixed storage deadline in seconds or ``"auto"``, which
    derives each pair's deadline from its entanglement-preserving lifetime.
    """

    t1_s: float = math.inf
    t2_s: float = 1.0
    num_modes: int = 10
    crosstalk_chi: float = 0.0
    cutoff_s: Cutoff = "auto"

    def __post_init__(self):
        if self.t1_s <= 0 or self.t2_s <= 0:
            raise BadParameter("T1 and T2 must be positive")
        if self.t2_s > 2.0 * self.t1_s:
            raise BadParameter(f"T2={self.t2_s} exceeds the physical limit 2*T1={2 * self.t1_s}")
        if int(self.num_modes) != self.num_modes or self.num_modes < 1:
            raise BadParameter("num_modes must be a positive integer")
        if self.crosstalk_chi < 0:
            raise BadParameter("crosstalk_chi must be >= 0")
        if self.cutoff_s != "auto" and not (isinstance(self.cutoff_s, (int, float)) and self.cutoff_s > 0):
            raise BadParameter(f"cutoff_s must be > 0 or 'auto', got {self.cutoff_s!r}")


@dataclass
class StoredHalf:
    pair_id: int
    mode_index: int
    stored_at: float
    fidelity_at_store: float
    deadline: float = math.inf


def effective_t2(params: MemoryParams, occupancy: int) -> float:
    """``T2 / (1 + chi (k - 1))`` for ``k`` occupied modes."""
    extra = max(0, occupancy - 1)
    return params.t2_s / (1.0 + params.crosstalk_chi * extra)


def current_fidelity(half: StoredHalf, now: float, params: MemoryParams, occupancy: int = 1) -> float:
    if now < half.stored_at:
        raise BadParameter("cannot evaluate a stored half before it was stored")
    return memory_decay(half.fidelity_at_store, now - half.stored_at, effective_t2(params, occupancy))


def default_deadline(params: MemoryParams, stored_at: float, fidelity: float, occupancy: int = 1) -> float:
    if params.cutoff_s == "auto":
        return stored_at + t_non_eb(fidelity, effective_t2(params, occupancy))
    return stored_at + float(params.cutoff_s)


class NodeMemory:
    """Mode table of one node.

    Modes are owned by flows (``reserve_mode``) and hold at most one
    :class:`StoredHalf` at a time.
    """

    def __init__(self, name: str, params: MemoryParams):
        self.name = name
        self.params = params
        self.owner: list[Optional[object]] = [None] * params.num_modes
        self.slots: list[Optional[StoredHalf]] = [None] * params.num_modes
        self.peak_occupancy = 0
        self.discards: Counter = Counter()

    @property
    def num_modes(self) -> int:
        return self.params.num_modes

    def free_modes(self) -> int:
        return sum(1 for o in self.owner if o is None)

    def reserve_mode(self, flow_id) -> int:
        for i, owner in enumerate(self.owner):
            if owner is None:
                self.owner[i] = flow_id
                return i
        raise MemoryFull(f"node {self.name}: all {self.num_modes} modes reserved")

    def release(self, mode: int) -> None:
        self.owner[mode] = None
        self.slots[mode] = None

    def modes_of(self, flow_id) -> list[int]:
        return [i for i, o in enumerate(self.owner) if o == flow_id]

    def occupancy(self) -> int:
        return sum(1 for s in self.slots if s is not None)

    def store(self, mode: int, pair_id: int, now: float, fidelity: float, deadline: float | None = None) -> StoredHalf:
        if self.slots[mode] is not None:
            raise MemoryFull(f"node {self.name}: mode {mode} already holds pair {self.slots[mode].pair_id}")
        occ = self.occupancy() + 1
        if deadline is None:
            deadline = default_deadline(self.params, now, fidelity, occ)
        half = StoredHalf(pair_id, mode, now, fidelity, deadline)
        self.slots[mode] = half
        self.peak_occupancy = max(self.peak_occupancy, occ)
        return half

    def take(self, mode: int) -> StoredHalf:
        half = self.slots[mode]
        if half is None:
            raise BadParameter(f"node {self.name}: mode {mode} is empty")
        self.slots[mode] = None
        return half

    def find(self, pair_id: int) -> Optional[StoredHalf]:
        for s in self.slots:
            if s is not None and s.pair_id == pair_id:
                return s
        return None

    def fidelity_of(self, half: StoredHalf, now: float) -> float:
        return current_fidelity(half, now, self.params, self.occupancy())

    def apply_cutoff(self, now: float, cause: str = "cutoff") -> list[int]:
        """Drop every half whose deadline has passed; returns the discarded pair ids."""
        dropped = []
        for i, s in enumerate(self.slots):
            if s is not None and now >= s.deadline:
                dropped.append(s.pair_id)
                self.slots[i] = None
        if dropped:
            self.discards[cause] += len(dropped)
        return dropped

    def stats(self) -> dict:
        return {
            "node": self.name,
            "num_modes": self.num_modes,
            "peak_occupancy": self.peak_occupancy,
            "discards": dict(sorted(self.discards.items())),
        }
