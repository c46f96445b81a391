"""Pure-Python twin of ``_kernels.pyx`` (same generator, same draw order)."""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def _seed_state(seed: int) -> list[int]:
    # splitmix64 expansion of the seed into the four state words
    x = seed & _MASK
    out = []
    for _ in range(4):
        x = (x + 0x9E3779B97F4A7C15) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


def _stream(seed: int):
    """xoshiro256** uniforms in [0, 1); state lives in locals for speed."""
    s0, s1, s2, s3 = _seed_state(seed)
    mask = _MASK
    scale = 1.0 / 9007199254740992.0
    while True:
        r = (s1 * 5) & mask
        r = (((r << 7) | (r >> 57)) & mask) * 9 & mask
        t = (s1 << 17) & mask
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & mask
        yield (r >> 11) * scale


def uniforms(seed: int, n: int) -> np.ndarray:
    draw = _stream(seed).__next__
    return np.array([draw() for _ in range(n)], dtype=np.float64)


def chain_sync_trials(p_links, p_swaps, trials: int, seed: int):
    draw = _stream(seed).__next__
    p_links = [float(p) for p in p_links]
    p_swaps = [float(p) for p in p_swaps]
    successes = 0
    link_fail = 0
    for _ in range(int(trials)):
        ok = True
        for p in p_links:
            if draw() >= p:
                ok = False
                break
        if not ok:
            link_fail += 1
            continue
        for p in p_swaps:
            if draw() >= p:
                ok = False
                break
        if ok:
            successes += 1
    return successes, link_fail


def async_chain_trials(p_links, p_swaps, trials: int, seed: int, max_slots: int = 100_000_000):
    draw = _stream(seed).__next__
    p_links = [float(p) for p in p_links]
    p_swaps = [float(p) for p in p_swaps]
    n = len(p_links)
    links = list(zip(range(n), p_links))
    joints = list(zip(range(1, n), p_swaps))
    waits = np.zeros(n, dtype=np.float64)
    total = 0.0
    completed = 0
    for _ in range(int(trials)):
        up = [False] * n
        gen = [0] * n
        joined = [False] * (n + 1)
        n_up = n_joined = 0
        slot = 0
        while slot < max_slots:
            slot += 1
            if n_up < n:
                for i, p in links:
                    if not up[i] and draw() < p:
                        up[i] = True
                        gen[i] = slot
                        n_up += 1
            for j, p in joints:
                if up[j - 1] and up[j] and not joined[j]:
                    if draw() < p:
                        joined[j] = True
                        n_joined += 1
                    else:
                        # a failed swap tears down the whole joined segment
                        a = j - 1
                        while a > 0 and joined[a]:
                            a -= 1
                        b = j
                        while b < n - 1 and joined[b + 1]:
                            b += 1
                        for k in range(a, b + 1):
                            up[k] = False
                        n_up -= b - a + 1
                        for k in range(a + 1, b + 1):
                            joined[k] = False
                        n_joined -= b - a - 1
            if n_up == n and n_joined == n - 1:
                break
        if n_up == n and n_joined == n - 1:
            completed += 1
            total += slot
            for i in range(n):
                waits[i] += slot - gen[i]
    return total, waits, completed
