"""Closed-form physical models on the scalar Werner fidelity.

Every function here has a density-matrix counterpart in
:mod:`qnetsim.oracle`; the test-suite checks them against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BadParameter

F_MIN = 0.25
#: Bell fidelity at and below which a pair is entanglement-breaking.
CLASSICAL_LIMIT = 2.0 / 3.0
DEFAULT_ATTENUATION_DB_PER_KM = 0.2


@dataclass(frozen=True)
class NoiseParams:
    """Per-node swap noise.

    Attributes:
        p_swap: Bell-state-measurement success probability.
        p_gate_depol: depolarizing parameter applied to the output of each swap.
        jitter_sigma_s: timing jitter standard deviation.
        pulse_width_s: photon wavepacket duration.
    """

    p_swap: float = 1.0
    p_gate_depol: float = 0.0
    jitter_sigma_s: float = 0.0
    pulse_width_s: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.p_swap <= 1.0:
            raise BadParameter(f"p_swap={self.p_swap!r} outside (0, 1]")
        if not 0.0 <= self.p_gate_depol <= 1.0:
            raise BadParameter(f"p_gate_depol={self.p_gate_depol!r} outside [0, 1]")
        if self.jitter_sigma_s < 0.0:
            raise BadParameter("jitter_sigma_s must be >= 0")
        if self.pulse_width_s <= 0.0:
            raise BadParameter("pulse_width_s must be > 0")

    def effective_p_swap(self, mode: str = "smooth") -> float:
        return self.p_swap * jitter_swap_multiplier(self.jitter_sigma_s, self.pulse_width_s, mode)


def _clamp_fidelity(f: float) -> float:
    return min(1.0, max(F_MIN, f))


def fiber_transmissivity(length_km: float, alpha_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM) -> float:
    """Photon survival probability ``10^(-alpha L / 10)``."""
    if length_km < 0 or alpha_db_per_km < 0:
        raise BadParameter("length and attenuation must be non-negative")
    return 10.0 ** (-alpha_db_per_km * length_km / 10.0)


def depolarize_fidelity(fidelity: float, p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise BadParameter(f"depolarizing parameter {p!r} outside [0, 1]")
    return _clamp_fidelity((1.0 - p) * fidelity + p * 0.25)


def memory_decay(f0: float, t: float, t2: float) -> float:
    """Bell fidelity of a pair whose stored half dephases for ``t`` seconds.

    ``F(t) = (1 + (2 F0 - 1) exp(-t / T2)) / 2``. Inputs below 1/2 sit at
    the dephasing floor and are returned unchanged (clamped model).
    """
    if t < 0:
        raise BadParameter(f"negative storage time {t!r}")
    if t2 <= 0:
        raise BadParameter(f"T2={t2!r} must be positive")
    if f0 <= 0.5:
        return f0
    if t == 0.0:
        return f0
    return 0.5 * (1.0 + (2.0 * f0 - 1.0) * math.exp(-t / t2))


def pair_t2(t2_a: float, t2_b: float) -> float:
    """Dephasing time for a pair with both halves stored.

    Applying :func:`memory_decay` once per half with ``t2_a`` then ``t2_b``
    equals one application with this combined constant.
    """
    if math.isinf(t2_a):
        return t2_b
    if math.isinf(t2_b):
        return t2_a
    return 1.0 / (1.0 / t2_a + 1.0 / t2_b)


def decay_both_halves(f0: float, t: float, t2_a: float, t2_b: float) -> float:
    f = f0
    if not math.isinf(t2_a):
        f = memory_decay(f, t, t2_a)
    if not math.isinf(t2_b):
        f = memory_decay(f, t, t2_b)
    return f


def t_non_eb(f0: float, t2: float) -> float:
    """Time until the fidelity decays to the 2/3 classical limit; 0 if already there."""
    if t2 <= 0:
        raise BadParameter(f"T2={t2!r} must be positive")
    if f0 <= CLASSICAL_LIMIT:
        return 0.0
    return t2 * math.log((2.0 * f0 - 1.0) / (1.0 / 3.0))


def swap_fidelity(f1: float, f2: float, p_gate_depol: float = 0.0) -> float:
    """Werner fidelity after swapping pairs of fidelity ``f1`` and ``f2``."""
    ideal = f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0
    return depolarize_fidelity(ideal, p_gate_depol)


def purify_success(f1: float, f2: float) -> float:
    e1, e2 = (1.0 - f1) / 3.0, (1.0 - f2) / 3.0
    return f1 * f2 + f1 * e2 + e1 * f2 + 5.0 * e1 * e2


def purify_pair(f1: float, f2: float) -> tuple[float, float]:
    """One BBPSSW round on two Werner pairs; returns ``(F', p_success)``."""
    p = purify_success(f1, f2)
    e1, e2 = (1.0 - f1) / 3.0, (1.0 - f2) / 3.0
    return _clamp_fidelity((f1 * f2 + e1 * e2) / p), p


def purify_step(fidelity: float) -> tuple[float, float]:
    """Symmetric BBPSSW recursion.

    ``p = F^2 + 2F(1-F)/3 + 5(1-F)^2/9`` and ``F' = (F^2 + ((1-F)/3)^2) / p``.
    """
    f = fidelity
    p = f * f + (2.0 / 3.0) * f * (1.0 - f) + (5.0 / 9.0) * (1.0 - f) ** 2
    return _clamp_fidelity((f * f + ((1.0 - f) / 3.0) ** 2) / p), p


def qber_from_fidelity(fidelity: float) -> float:
    """Z-basis error rate of a Werner pair, ``2(1-F)/3``."""
    return min(0.5, max(0.0, 2.0 * (1.0 - fidelity) / 3.0))


def jitter_swap_multiplier(sigma_s: float, tau_s: float, mode: str = "smooth") -> float:
    """Fraction of BSM attempts that still interfere under timing jitter.

    ``smooth``: ``exp(-sigma^2 / (2 tau^2))``; ``hard``: 1 if ``sigma < tau`` else 0.
    """
    if sigma_s < 0 or tau_s <= 0:
        raise BadParameter("need sigma >= 0 and tau > 0")
    if mode == "smooth":
        return math.exp(-(sigma_s**2) / (2.0 * tau_s**2))
    if mode == "hard":
        return 1.0 if sigma_s < tau_s else 0.0
    raise BadParameter(f"unknown jitter mode {mode!r}")
