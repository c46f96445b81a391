# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte-Carlo kernels.

Must stay draw-for-draw identical to ``_kernels_py``; both use
xoshiro256** seeded through splitmix64.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef struct Xoshiro:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t _splitmix(uint64_t* x) nogil:
    x[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = x[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline void _seed(Xoshiro* st, uint64_t seed) nogil:
    cdef uint64_t x = seed
    st.s0 = _splitmix(&x)
    st.s1 = _splitmix(&x)
    st.s2 = _splitmix(&x)
    st.s3 = _splitmix(&x)


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline double _uniform(Xoshiro* st) nogil:
    cdef uint64_t result = _rotl(st.s1 * 5, 7) * 9
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = _rotl(st.s3, 45)
    return <double>(result >> 11) * (1.0 / 9007199254740992.0)


def uniforms(uint64_t seed, Py_ssize_t n):
    cdef Xoshiro st
    _seed(&st, seed)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] view = out
    cdef Py_ssize_t i
    for i in range(n):
        view[i] = _uniform(&st)
    return out


def chain_sync_trials(double[::1] p_links, double[::1] p_swaps, long trials, uint64_t seed):
    """Count single-slot end-to-end successes of a synchronous chain."""
    cdef Xoshiro st
    _seed(&st, seed)
    cdef Py_ssize_t n = p_links.shape[0]
    cdef Py_ssize_t m = p_swaps.shape[0]
    cdef long successes = 0
    cdef long link_fail = 0
    cdef long t
    cdef Py_ssize_t i
    cdef bint ok
    with nogil:
        for t in range(trials):
            ok = True
            for i in range(n):
                if _uniform(&st) >= p_links[i]:
                    ok = False
                    break
            if not ok:
                link_fail += 1
                continue
            for i in range(m):
                if _uniform(&st) >= p_swaps[i]:
                    ok = False
                    break
            if ok:
                successes += 1
    return successes, link_fail


def async_chain_trials(double[::1] p_links, double[::1] p_swaps, long trials, uint64_t seed,
                       long max_slots=100000000):
    """Slotted asynchronous chain with swap-as-soon-as-adjacent.

    Returns ``(total_slots, wait_slots_per_link, completed)`` summed over trials.
    A failed swap resets every link of both consumed segments.
    """
    cdef Xoshiro st
    _seed(&st, seed)
    cdef Py_ssize_t n = p_links.shape[0]
    waits = np.zeros(n, dtype=np.float64)
    cdef double[::1] wv = waits
    cdef char* up = <char*>malloc(n)
    cdef char* joined = <char*>malloc(n + 1)
    cdef long* gen = <long*>malloc(n * sizeof(long))
    cdef double total = 0.0
    cdef long completed = 0
    cdef long t, slot
    cdef Py_ssize_t i, j, a, b, k
    cdef bint done
    try:
        with nogil:
            for t in range(trials):
                for i in range(n):
                    up[i] = 0
                    gen[i] = 0
                for i in range(n + 1):
                    joined[i] = 0
                slot = 0
                done = False
                while not done and slot < max_slots:
                    slot += 1
                    for i in range(n):
                        if not up[i]:
                            if _uniform(&st) < p_links[i]:
                                up[i] = 1
                                gen[i] = slot
                    for j in range(1, n):
                        if up[j - 1] and up[j] and not joined[j]:
                            if _uniform(&st) < p_swaps[j - 1]:
                                joined[j] = 1
                            else:
                                a = j - 1
                                while a > 0 and joined[a]:
                                    a -= 1
                                b = j
                                while b < n - 1 and joined[b + 1]:
                                    b += 1
                                for k in range(a, b + 1):
                                    up[k] = 0
                                for k in range(a + 1, b + 1):
                                    joined[k] = 0
                    done = True
                    for i in range(n):
                        if not up[i]:
                            done = False
                            break
                    if done:
                        for j in range(1, n):
                            if not joined[j]:
                                done = False
                                break
                if done:
                    completed += 1
                    total += slot
                    for i in range(n):
                        wv[i] += slot - gen[i]
    finally:
        free(up)
        free(joined)
        free(gen)
    return total, waits, completed
