"""Deterministic discrete-event core.

The engine owns the simulated clock, a binary-heap future event list with
FIFO tie-breaking, per-(node, purpose) random streams derived from a single
root seed, and delivery of classical messages with fiber propagation delay.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

import numpy as np

from .errors import PastEvent

#: Signal velocity in optical fiber (km/s), refractive index ~1.5.
V_FIBER_KM_S = 2.0e5


class EventKind(str, enum.Enum):
    GENERATION_ATTEMPT = "GenerationAttempt"
    HERALD_ARRIVAL = "HeraldArrival"
    SWAP_TRIGGER = "SwapTrigger"
    PURIFY_TRIGGER = "PurifyTrigger"
    CUTOFF_SWEEP = "CutoffSweep"
    CONTROL_MESSAGE = "ControlMessage"
    MEASUREMENT_RESULT = "MeasurementResult"


@dataclass
class Event:
    time: float
    kind: EventKind
    payload: Any = None
    node: Optional[str] = None
    handler: Optional[Callable[["Event"], None]] = field(default=None, repr=False, compare=False)
    seq: int = -1
    cancelled: bool = False


@dataclass(frozen=True)
class LogRecord:
    time: float
    seq: int
    kind: str
    node: Optional[str]
    summary: str

    def to_json(self) -> str:
        return json.dumps(
            {"time": self.time, "seq": self.seq, "kind": self.kind, "node": self.node, "payload": self.summary},
            sort_keys=True,
        )


class EventLog(list):
    """List of :class:`LogRecord`, exportable as line-delimited JSON.

    Each line carries ``time``, ``seq``, ``kind``, ``node`` and a short
    ``payload`` summary. The format is meant for debugging and may change.
    """

    def to_lines(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lines())

    def count(self, kind) -> int:  # type: ignore[override]
        kind = kind.value if isinstance(kind, EventKind) else kind
        return sum(1 for rec in self if rec.kind == kind)


def _summarize(payload: Any) -> str:
    if payload is None:
        return ""
    if isinstance(payload, dict):
        parts = []
        for key in sorted(payload):
            val = payload[key]
            if isinstance(val, float):
                val = repr(val)
            parts.append(f"{key}={val}")
        return " ".join(parts)
    return str(payload)


def stream_key(node: str, purpose: str) -> tuple[int, ...]:
    """Stable spawn key for a ``(node, purpose)`` label.

    Python's ``hash`` is salted per process, so a cryptographic digest is
    used to keep streams identical across runs and platforms.
    """
    digest = hashlib.blake2b(f"{node}\x00{purpose}".encode(), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def random_stream(root_seed: int, node: str, purpose: str) -> np.random.Generator:
    """Independent generator for one ``(node, purpose)`` label."""
    ss = np.random.SeedSequence(entropy=int(root_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=stream_key(node, purpose))
    return np.random.Generator(np.random.PCG64(ss))


class Engine:
    """Single-threaded event loop.

    Args:
        root_seed: 64-bit seed from which every random stream is derived.
        v_fiber_km_s: classical signal velocity used by :meth:`send_classical`.
        min_latency_s: floor applied to every classical message delay.
        topology: default topology for distance lookups.
    """

    def __init__(self, root_seed: int = 0, v_fiber_km_s: float = V_FIBER_KM_S,
                 min_latency_s: float = 0.0, topology=None, keep_log: bool = True):
        self.root_seed = int(root_seed)
        self.v_fiber_km_s = float(v_fiber_km_s)
        self.min_latency_s = float(min_latency_s)
        self.topology = topology
        self.keep_log = keep_log
        self._now = 0.0
        self._seq = 0
        self._queue: list[tuple[float, int, Event]] = []
        self._handles: dict[int, Event] = {}
        self._streams: dict[tuple[str, str], np.random.Generator] = {}
        self.log = EventLog()
        self.processed = 0

    @property
    def now(self) -> float:
        return self._now

    def stream(self, node: str, purpose: str) -> np.random.Generator:
        key = (str(node), str(purpose))
        gen = self._streams.get(key)
        if gen is None:
            gen = random_stream(self.root_seed, *key)
            self._streams[key] = gen
        return gen

    def schedule(self, event: Event) -> int:
        """Enqueue ``event`` and return a handle usable with :meth:`cancel`."""
        if event.time < self._now:
            raise PastEvent(f"event at t={event.time!r} scheduled after clock reached t={self._now!r}")
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (event.time, event.seq, event))
        self._handles[event.seq] = event
        return event.seq

    def at(self, time: float, kind: EventKind, handler=None, payload=None, node=None) -> int:
        return self.schedule(Event(time, kind, payload, node, handler))

    def after(self, delay: float, kind: EventKind, handler=None, payload=None, node=None) -> int:
        return self.schedule(Event(self._now + delay, kind, payload, node, handler))

    def cancel(self, handle: int) -> bool:
        event = self._handles.pop(handle, None)
        if event is None:
            return False
        event.cancelled = True
        return True

    def pending(self) -> int:
        return len(self._handles)

    def run_until(self, t_end: float) -> EventLog:
        """Process every event with ``time <= t_end`` and advance the clock to ``t_end``."""
        if t_end < self._now:
            raise PastEvent(f"run_until({t_end!r}) is before clock {self._now!r}")
        out = EventLog()
        queue = self._queue
        while queue and queue[0][0] <= t_end:
            time, seq, event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self._handles.pop(seq, None)
            self._now = time
            if self.keep_log:
                rec = LogRecord(time, seq, event.kind.value, event.node, _summarize(event.payload))
                out.append(rec)
                self.log.append(rec)
            self.processed += 1
            if event.handler is not None:
                event.handler(event)
        self._now = float(t_end)
        return out

    def classical_delay(self, src: str, dst: str, topology=None) -> float:
        topo = topology if topology is not None else self.topology
        dist = topo.distance_km(src, dst)
        return max(dist / self.v_fiber_km_s, self.min_latency_s)

    def send_classical(self, src: str, dst: str, payload=None, topology=None, handler=None) -> Event:
        """Schedule a ControlMessage arriving at ``dst`` after the fiber delay."""
        delay = self.classical_delay(src, dst, topology)
        event = Event(self._now + delay, EventKind.CONTROL_MESSAGE, payload, dst, handler)
        self.schedule(event)
        return event


def merge_logs(logs: Iterable[EventLog]) -> EventLog:
    merged = EventLog()
    for log in logs:
        merged.extend(log)
    return merged
