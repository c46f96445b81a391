"""End-to-end performance formulas and per-run report accumulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

from .errors import BadParameter


@dataclass(frozen=True)
class SkrParams:
    q_raw_rate_hz: float
    f_ec: float = 1.0

    def __post_init__(self):
        if self.q_raw_rate_hz < 0:
            raise BadParameter("raw rate must be >= 0")
        if self.f_ec < 1.0:
            raise BadParameter("error-correction overhead f_ec must be >= 1")


@dataclass(frozen=True)
class QecParams:
    p_phys: float
    p_threshold: float
    distance: int = 3
    prefactor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_phys <= 1.0:
            raise BadParameter("p_phys outside [0, 1]")
        if not 0.0 < self.p_threshold < 1.0:
            raise BadParameter("p_threshold outside (0, 1)")
        if self.distance < 3 or self.distance % 2 == 0:
            raise BadParameter("code distance must be odd and >= 3")
        if self.prefactor <= 0:
            raise BadParameter("prefactor must be > 0")


def effective_eps(egr: float, p_swap: float, n_hops: int, eta_link: float, overhead: float = 1.0) -> float:
    """Delivered pairs per second, ``EGR * P_swap^(N-1) * eta^N / O`` with unit constant."""
    if overhead < 1.0:
        raise BadParameter("protocol overhead must be >= 1")
    if n_hops < 1:
        raise BadParameter("n_hops must be >= 1")
    return egr * p_swap ** (n_hops - 1) * eta_link**n_hops / overhead


def binary_entropy(q: float) -> float:
    """Shannon entropy in bits, with ``h(0) = h(1) = 0``."""
    if not 0.0 <= q <= 1.0:
        raise BadParameter(f"probability {q!r} outside [0, 1]")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def secret_key_rate(params: SkrParams, qber: float) -> float:
    """BB84-style lower bound ``q (1 - h - f_EC h)``, clamped at zero."""
    if not 0.0 <= qber <= 0.5:
        raise BadParameter(f"QBER {qber!r} outside [0, 0.5]")
    h = binary_entropy(qber)
    return max(0.0, params.q_raw_rate_hz * (1.0 - (1.0 + params.f_ec) * h))


def plob_capacity(eta: float, with_linear: bool = False):
    """Repeaterless capacity ``-log2(1 - eta)`` bits per channel use.

    With ``with_linear`` also returns the small-loss approximation
    ``eta / ln 2`` (about 1.44 eta).
    """
    if not 0.0 <= eta < 1.0:
        raise BadParameter(f"transmissivity {eta!r} outside [0, 1)")
    exact = -math.log1p(-eta) / math.log(2.0) if eta > 0 else 0.0
    if with_linear:
        return exact, eta / math.log(2.0)
    return exact


def logical_error_rate(params: QecParams) -> float:
    """Surface-code style ``C (p / p_th)^((d+1)/2)``."""
    return params.prefactor * (params.p_phys / params.p_threshold) ** ((params.distance + 1) / 2)


@dataclass(frozen=True)
class DelayBreakdown:
    transmission: float
    generation: float
    protocol: float

    @property
    def total(self) -> float:
        return self.transmission + self.generation + self.protocol


def quantum_delay_breakdown(delivery) -> DelayBreakdown:
    """Split one delivery's latency into transmission, generation and protocol time.

    ``delivery`` needs ``delivered_at``, ``cycle_start``, ``transmission_s``
    and ``generation_s`` (an :class:`~qnetsim.link_layer.EntangledPair` or a
    delivery record). Latency runs from the start of the attempt cycle of
    the earliest constituent pair to delivery; the protocol share is what
    remains after one source period and one photon flight, i.e. retries,
    heralds, swap notifications and purification rounds.
    """
    latency = delivery.delivered_at - delivery.cycle_start
    gen = delivery.generation_s
    trans = delivery.transmission_s
    return DelayBreakdown(trans, gen, max(0.0, latency - gen - trans))


@dataclass
class Delivery:
    request_id: str
    delivered_at: float
    fidelity: float
    hops: int
    cycle_start: float
    generation_s: float
    transmission_s: float


#: Stable CSV column order of the per-request metrics file.
METRIC_COLUMNS = (
    "replication", "seed", "request_id", "app_type", "src", "dst", "admitted", "reason",
    "path", "n_hops", "depth", "scheduling",
    "r_est", "f_est", "delivered", "effective_eps", "eps_formula",
    "fidelity_mean", "fidelity_min", "qber", "skr_bits_per_s", "utility",
    "mean_quantum_delay_s", "mean_transmission_s", "mean_generation_s", "mean_protocol_s",
    "link_attempts", "per_use_rate", "plob_bound",
    "pairs_created", "swaps_ok", "swaps_failed", "purify_ok", "purify_failed",
    "discarded_cutoff", "invalidated_partner", "consumed_swap", "consumed_purify", "in_memory_at_end",
)


@dataclass
class MetricsReport:
    """Per-request outcome of one replication (one CSV row)."""

    replication: int
    seed: int
    request_id: str
    app_type: str
    src: str
    dst: str
    admitted: bool
    reason: str = ""
    path: str = ""
    n_hops: int = 0
    depth: int = 0
    scheduling: str = ""
    r_est: float = 0.0
    f_est: float = 0.0
    delivered: int = 0
    effective_eps: float = 0.0
    eps_formula: float = 0.0
    fidelity_mean: float = 0.0
    fidelity_min: float = 0.0
    qber: float = 0.5
    skr_bits_per_s: float = 0.0
    utility: float = 0.0
    mean_quantum_delay_s: float = 0.0
    mean_transmission_s: float = 0.0
    mean_generation_s: float = 0.0
    mean_protocol_s: float = 0.0
    link_attempts: int = 0
    per_use_rate: float = 0.0
    plob_bound: float = 0.0
    pairs_created: int = 0
    swaps_ok: int = 0
    swaps_failed: int = 0
    purify_ok: int = 0
    purify_failed: int = 0
    discarded_cutoff: int = 0
    invalidated_partner: int = 0
    consumed_swap: int = 0
    consumed_purify: int = 0
    in_memory_at_end: int = 0

    def row(self) -> list:
        d = asdict(self)
        return [d[c] for c in METRIC_COLUMNS]


NUMERIC_COLUMNS = tuple(
    c for c in METRIC_COLUMNS
    if c not in ("replication", "seed", "request_id", "app_type", "src", "dst", "admitted", "reason",
                 "path", "scheduling")
)


def mean_std_ci95(values: Sequence[float]) -> tuple[float, float, float, float]:
    """Mean, sample std, and a normal-approximation 95% interval."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan, math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0, mean, mean
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    std = math.sqrt(var)
    half = 1.959963984540054 * std / math.sqrt(n)
    return mean, std, mean - half, mean + half


def aggregate(reports: Iterable[MetricsReport]) -> dict[str, dict[str, dict[str, float]]]:
    """Per-request, per-metric mean/std/CI95 across replications (ordered by replication)."""
    by_req: dict[str, list[MetricsReport]] = {}
    for r in sorted(reports, key=lambda r: (r.request_id, r.replication)):
        by_req.setdefault(r.request_id, []).append(r)
    out = {}
    for rid, rows in by_req.items():
        stats = {}
        for col in NUMERIC_COLUMNS:
            vals = [float(getattr(r, col)) for r in rows]
            mean, std, lo, hi = mean_std_ci95(vals)
            stats[col] = {"mean": mean, "std": std, "ci95_low": lo, "ci95_high": hi, "n": len(vals)}
        out[rid] = stats
    return out
