"""Elementary entanglement generation with heralding, and link-level purification."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .channels import F_MIN, fiber_transmissivity, purify_pair, DEFAULT_ATTENUATION_DB_PER_KM
from .engine import V_FIBER_KM_S
from .errors import BadParameter


@dataclass(frozen=True)
class LinkParams:
    """Physical fiber link.

    ``p_gen`` folds fiber loss and the lumped source/coupling/detector
    efficiency into one per-attempt heralding probability.
    """

    length_km: float = 10.0
    attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM
    attempt_rate_hz: float = 1.0e6
    f0_link: float = 0.95
    extra_efficiency: float = 1.0

    def __post_init__(self):
        if self.length_km <= 0:
            raise BadParameter("length_km must be > 0")
        if self.attenuation_db_per_km < 0:
            raise BadParameter("attenuation must be >= 0")
        if self.attempt_rate_hz <= 0:
            raise BadParameter("attempt_rate_hz must be > 0")
        if not F_MIN < self.f0_link <= 1.0:
            raise BadParameter(f"f0_link={self.f0_link!r} outside (1/4, 1]")
        if not 0.0 < self.extra_efficiency <= 1.0:
            raise BadParameter("extra_efficiency outside (0, 1]")

    @property
    def eta(self) -> float:
        return fiber_transmissivity(self.length_km, self.attenuation_db_per_km)

    @property
    def p_gen(self) -> float:
        return self.extra_efficiency * self.eta

    @property
    def attempt_period_s(self) -> float:
        return 1.0 / self.attempt_rate_hz


HERALD_MODELS = ("midpoint", "round_trip")


def herald_delay(link: LinkParams, v_fiber_km_s: float = V_FIBER_KM_S, model: str = "midpoint") -> float:
    """Time from emission until both ends know the outcome.

    ``midpoint``: photons fly L/2 to a central station which heralds back
    over L/2, i.e. ``L / v``. ``round_trip``: the station sits at one end,
    so the far node needs a full return trip, ``2 L / v``.
    """
    one_way = link.length_km / v_fiber_km_s
    if model == "midpoint":
        return one_way
    if model == "round_trip":
        return 2.0 * one_way
    raise BadParameter(f"unknown herald model {model!r}")


def photon_flight(link: LinkParams, v_fiber_km_s: float = V_FIBER_KM_S, model: str = "midpoint") -> float:
    """Quantum-signal propagation part of the herald delay."""
    one_way = link.length_km / v_fiber_km_s
    return 0.5 * one_way if model == "midpoint" else one_way


_pair_ids = itertools.count()


@dataclass
class EntangledPair:
    id: int
    endpoints: tuple[str, str]
    fidelity: float
    created_at: float
    hops_composed: int = 1
    herald_time: float = 0.0
    # time at which ``fidelity`` is valid; decay accrues from here
    updated_at: float = -1.0
    constituents: int = 1
    cycle_start: float = 0.0
    generation_s: float = 0.0
    transmission_s: float = 0.0

    def __post_init__(self):
        if self.endpoints[0] == self.endpoints[1]:
            raise BadParameter("pair endpoints must differ")
        if not F_MIN <= self.fidelity <= 1.0 + 1e-12:
            raise BadParameter(f"pair fidelity {self.fidelity!r} outside [1/4, 1]")
        if self.updated_at < 0:
            self.updated_at = self.created_at


def new_pair_id() -> int:
    return next(_pair_ids)


@dataclass
class GenerationOutcome:
    success: bool
    attempt_time: float
    herald_time: float
    attempts: int = 1
    pair: Optional[EntangledPair] = None
    next_attempt: float = 0.0


def attempt_generation(link: LinkParams, rng: np.random.Generator, now: float = 0.0,
                       endpoints: tuple[str, str] = ("A", "B"), v_fiber_km_s: float = V_FIBER_KM_S,
                       herald_model: str = "midpoint", pair_id: int | None = None,
                       free_modes: bool = True) -> GenerationOutcome:
    """A single heralded attempt started at ``now``.

    The source fires one attempt period after ``now``; the outcome is known
    at both ends one herald delay later. Attempts are pipelined at the source
    rate, so after a failure the next attempt starts at ``next_attempt``,
    one period after ``now``, without waiting for the herald.
    """
    from .errors import NoFreeMode

    if not free_modes:
        raise NoFreeMode("both endpoints need a free reserved mode")
    emit = now + link.attempt_period_s
    herald = emit + herald_delay(link, v_fiber_km_s, herald_model)
    if rng.random() >= link.p_gen:
        return GenerationOutcome(False, now, herald, next_attempt=emit)
    pid = new_pair_id() if pair_id is None else pair_id
    flight = photon_flight(link, v_fiber_km_s, herald_model)
    pair = EntangledPair(pid, endpoints, link.f0_link, emit, 1, herald,
                         cycle_start=now, generation_s=link.attempt_period_s, transmission_s=flight)
    return GenerationOutcome(True, now, herald, 1, pair)


def sample_generation(link: LinkParams, rng: np.random.Generator, now: float, endpoints: tuple[str, str],
                      v_fiber_km_s: float = V_FIBER_KM_S, herald_model: str = "midpoint",
                      share: float = 1.0, max_attempts: float = math.inf,
                      pair_id: int | None = None) -> GenerationOutcome:
    """Run attempts from ``now`` until the first success, skipping failures in one draw.

    Attempts fire every ``period / share`` seconds; the number needed is
    geometric with mean ``1 / p_gen``, which is statistically identical to
    repeated :func:`attempt_generation` calls. The successful pair is
    heralded one herald delay after its emission. If ``max_attempts`` is
    finite and exceeded, an unsuccessful outcome is returned whose
    ``herald_time`` is when the last permitted attempt is known to have failed.
    """
    period = link.attempt_period_s / share
    hd = herald_delay(link, v_fiber_km_s, herald_model)
    k = int(rng.geometric(link.p_gen))
    if k > max_attempts:
        n = int(max_attempts)
        return GenerationOutcome(False, now, now + n * period + hd, n, next_attempt=now + n * period)
    emit = now + k * period
    herald = emit + hd
    flight = photon_flight(link, v_fiber_km_s, herald_model)
    pid = new_pair_id() if pair_id is None else pair_id
    pair = EntangledPair(pid, endpoints, link.f0_link, emit, 1, herald,
                         cycle_start=now, generation_s=period, transmission_s=flight)
    return GenerationOutcome(True, now, herald, k, pair, next_attempt=herald)


def expected_link_rate(link: LinkParams) -> float:
    """``attempt_rate * p_gen``; heralding dead time is ignored."""
    return link.attempt_rate_hz * link.p_gen


@dataclass
class PurificationFailure:
    round: int
    cause: str
    consumed: int
    time: float = 0.0


def run_purification(pairs: list[EntangledPair], depth: int, noise=None, rng: np.random.Generator | None = None,
                     now: float = 0.0, round_trip_s: float = 0.0,
                     decay: Callable[[float, float], float] | None = None, pair_id: int | None = None):
    """Pairwise purification tournament over ``2**depth`` pairs with equal endpoints.

    Each round sorts survivors by fidelity, couples neighbours, and runs one
    BBPSSW step on each couple. Any
    failed round aborts the whole batch. Every round costs one classical
    round trip, during which ``decay(F, dt)`` (if given) is applied.

    Returns the surviving :class:`EntangledPair` or a :class:`PurificationFailure`.
    ``noise`` is accepted for interface symmetry; local gate noise in the
    purification circuit is not modelled.
    """
    del noise
    if depth < 0:
        raise BadParameter("depth must be >= 0")
    if len(pairs) != 2**depth:
        raise BadParameter(f"depth {depth} needs {2 ** depth} pairs, got {len(pairs)}")
    if depth == 0:
        return pairs[0]
    ends = {tuple(sorted(p.endpoints)) for p in pairs}
    if len(ends) != 1:
        raise BadParameter("purification needs pairs with identical endpoints")
    if rng is None:
        raise BadParameter("purification needs a random stream")
    survivors = sorted((p.fidelity for p in pairs))
    t = now
    for rnd in range(1, depth + 1):
        nxt = []
        for i in range(0, len(survivors), 2):
            f_out, p_ok = purify_pair(survivors[i], survivors[i + 1])
            if rng.random() >= p_ok:
                return PurificationFailure(rnd, "coincidence-mismatch", len(pairs), t + round_trip_s)
            nxt.append(f_out)
        t += round_trip_s
        if decay is not None and round_trip_s > 0:
            nxt = [decay(f, round_trip_s) for f in nxt]
        survivors = sorted(nxt)
    base = pairs[0]
    out = replace(
        base,
        id=new_pair_id() if pair_id is None else pair_id,
        fidelity=survivors[0],
        created_at=t,
        updated_at=t,
        constituents=sum(p.constituents for p in pairs),
        cycle_start=min(p.cycle_start for p in pairs),
        hops_composed=max(p.hops_composed for p in pairs),
    )
    return out
