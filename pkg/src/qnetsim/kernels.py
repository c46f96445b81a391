"""Backend selection for the Monte-Carlo kernels.

The compiled extension is used when it imports; setting
``QNETSIM_PURE_PYTHON=1`` forces the Python implementation.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("QNETSIM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _arr(values) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype=np.float64).reshape(-1))


def uniforms(seed: int, n: int, impl=None) -> np.ndarray:
    return (impl or _impl).uniforms(int(seed) & 0xFFFFFFFFFFFFFFFF, int(n))


def chain_sync_trials(p_links, p_swaps, trials: int, seed: int, impl=None) -> tuple[int, int]:
    """Single-slot synchronous trials: ``(end-to-end successes, trials lost to a link failure)``."""
    impl = impl or _impl
    s, f = impl.chain_sync_trials(_arr(p_links), _arr(p_swaps), int(trials), int(seed) & 0xFFFFFFFFFFFFFFFF)
    return int(s), int(f)


def async_chain_trials(p_links, p_swaps, trials: int, seed: int, max_slots: int = 100_000_000, impl=None):
    """Asynchronous chain Monte Carlo; returns ``(mean_slots, mean_wait_slots_per_link, completed)``."""
    impl = impl or _impl
    total, waits, completed = impl.async_chain_trials(
        _arr(p_links), _arr(p_swaps), int(trials), int(seed) & 0xFFFFFFFFFFFFFFFF, int(max_slots)
    )
    if completed == 0:
        return float("inf"), np.full(len(waits), float("inf")), 0
    return total / completed, np.asarray(waits) / completed, int(completed)


def implementations() -> dict:
    """Every importable backend, keyed by name (used by tests and the benchmark)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
