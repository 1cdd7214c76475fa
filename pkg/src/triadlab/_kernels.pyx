# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_fallback``; same signatures, same random stream."""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.stdint cimport uint64_t, int64_t, int32_t
from numpy.random cimport bitgen_t

import numpy as np

cdef extern from *:
    """
    typedef unsigned __int128 tl_u128;
    static inline uint64_t tl_mulhi(uint64_t a, uint64_t b) {
        return (uint64_t)(((tl_u128)a * (tl_u128)b) >> 64);
    }
    """
    uint64_t tl_mulhi(uint64_t a, uint64_t b) nogil

cdef enum:
    TRIAD_MEDIAN = 0
    RESTRICTED = 1
    DYAD_MIDPOINT = 2
    DYAD_ENDPOINT = 3

cdef enum:
    RUNNING = 0
    CONVERGED = 1
    ERR_NOT_MEDIAN = -1
    ERR_AMBIGUOUS = -2
    NO_DECISION = -3


cdef bitgen_t* _bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    return <bitgen_t*>PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline uint64_t _bounded(bitgen_t* rng, uint64_t n) noexcept nogil:
    return tl_mulhi(rng.next_uint64(rng.state), n)


cdef inline int _coin(bitgen_t* rng) noexcept nogil:
    return <int>(rng.next_uint64(rng.state) >> 63)


cdef int64_t _median_walk(const int64_t[::1] indptr, const int32_t[::1] indices,
                          const int32_t[:, ::1] dist, int64_t x, int64_t y, int64_t z) noexcept nogil:
    cdef int64_t c = x, nb, j
    cdef int32_t dy, dz
    cdef bint moved = True
    while moved:
        moved = False
        dy = dist[c, y]
        dz = dist[c, z]
        for j in range(indptr[c], indptr[c + 1]):
            nb = indices[j]
            if dist[nb, y] < dy and dist[nb, z] < dz:
                c = nb
                moved = True
                break
    if dist[y, c] + dist[c, z] != dist[y, z]:
        return -1
    return c


cdef inline int64_t _tally(int64_t c0, int64_t c1, int64_t c2) noexcept nogil:
    # winner is any node named by at least two votes
    if c0 == c1 or c0 == c2:
        return c0
    if c1 == c2:
        return c1
    return NO_DECISION


cdef int64_t _restricted_vote(const int32_t[:, ::1] dist, int64_t a, int64_t b, int64_t c,
                              bitgen_t* rng) noexcept nogil:
    cdef int64_t m[3]
    cdef int64_t choice[3]
    cdef int64_t p, q
    cdef int32_t dp, dq
    cdef int i
    m[0] = a
    m[1] = b
    m[2] = c
    for i in range(3):
        if i == 0:
            p = m[1]
            q = m[2]
        elif i == 1:
            p = m[0]
            q = m[2]
        else:
            p = m[0]
            q = m[1]
        dp = dist[m[i], p]
        dq = dist[m[i], q]
        if dp < dq:
            choice[i] = p
        elif dq < dp:
            choice[i] = q
        else:
            choice[i] = q if _coin(rng) else p
    return _tally(choice[0], choice[1], choice[2])


cdef int64_t _dyad_midpoint(const int64_t[::1] indptr, const int32_t[::1] indices,
                            const int32_t[:, ::1] dist, int64_t x, int64_t y,
                            bitgen_t* rng) noexcept nogil:
    cdef int32_t d = dist[x, y]
    cdef int64_t steps, c, nxt, nb, j, s, mid
    cdef int32_t target
    if d == 0:
        return x
    steps = d // 2
    if d % 2:
        steps += _coin(rng)
    c = x
    mid = x
    for s in range(d):
        nxt = -1
        target = dist[c, y] - 1
        for j in range(indptr[c], indptr[c + 1]):
            nb = indices[j]
            if dist[nb, y] == target:
                if nxt >= 0:
                    return ERR_AMBIGUOUS
                nxt = nb
        c = nxt
        if s + 1 == steps:
            mid = c
    return mid


cdef int _step(int rule, const int64_t[::1] indptr, const int32_t[::1] indices,
               const int32_t[:, ::1] dist, int32_t[::1] owners, int64_t[::1] counts,
               bitgen_t* rng) noexcept nogil:
    cdef uint64_t n_tokens = owners.shape[0]
    cdef int64_t sel[3]
    cdef int64_t mem[3]
    cdef int size = 3 if (rule == TRIAD_MEDIAN or rule == RESTRICTED) else 2
    cdef int i
    cdef int64_t dest, src
    for i in range(size):
        sel[i] = <int64_t>_bounded(rng, n_tokens)
        mem[i] = owners[sel[i]]
    if rule == TRIAD_MEDIAN:
        dest = _median_walk(indptr, indices, dist, mem[0], mem[1], mem[2])
        if dest < 0:
            return ERR_NOT_MEDIAN
    elif rule == RESTRICTED:
        dest = _restricted_vote(dist, mem[0], mem[1], mem[2], rng)
    elif rule == DYAD_MIDPOINT:
        dest = _dyad_midpoint(indptr, indices, dist, mem[0], mem[1], rng)
        if dest == ERR_AMBIGUOUS:
            return ERR_AMBIGUOUS
    else:
        dest = mem[1] if _coin(rng) else mem[0]
    if dest == NO_DECISION:
        return RUNNING
    for i in range(size):
        src = owners[sel[i]]
        if src != dest:
            counts[src] -= 1
            counts[dest] += 1
            owners[sel[i]] = <int32_t>dest
    if counts[dest] == <int64_t>n_tokens:
        return CONVERGED
    return RUNNING


def run_tokens(int rule, const int64_t[::1] indptr, const int32_t[::1] indices,
               const int32_t[:, ::1] dist, int32_t[::1] owners, int64_t[::1] counts,
               object bit_generator, int64_t max_steps):
    """Step until one node holds every token or ``max_steps`` rounds elapse (in place)."""
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef int64_t n_tokens = owners.shape[0]
    cdef int64_t steps = 0
    cdef int64_t i
    cdef int status = RUNNING
    if n_tokens == 0:
        return 0, CONVERGED
    for i in range(counts.shape[0]):
        if counts[i] == n_tokens:
            return 0, CONVERGED
    with bit_generator.lock, nogil:
        while steps < max_steps:
            status = _step(rule, indptr, indices, dist, owners, counts, rng)
            steps += 1
            if status != RUNNING:
                break
    return steps, status


cdef inline int _star_position(int64_t root, int64_t[::1] leaves, int64_t idx) noexcept nogil:
    cdef int j
    if idx < root:
        return 0
    idx -= root
    for j in range(leaves.shape[0]):
        if idx < leaves[j]:
            return j + 1
        idx -= leaves[j]
    return -1


cdef inline int _star_dist(int p, int q) noexcept nogil:
    if p == q:
        return 0
    if p == 0 or q == 0:
        return 1
    return 2


cdef void _concentrate(int64_t[::1] leaves) noexcept nogil:
    cdef int64_t top = 0, total = 0, full, rest
    cdef Py_ssize_t j, L = leaves.shape[0]
    for j in range(L):
        total += leaves[j]
        if leaves[j] > top:
            top = leaves[j]
    if top == 0:
        return
    full = total // top
    rest = total % top
    for j in range(L):
        if j < full:
            leaves[j] = top
        elif j == full:
            leaves[j] = rest
        else:
            leaves[j] = 0


def run_star(int64_t root, int64_t[::1] leaves, bint concentrate, object bit_generator,
             int64_t max_steps):
    """Restricted-triad chain on star counts (optionally concentrated). Returns (root, steps, status)."""
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef int64_t n = root, steps = 0, leafmax = 0
    cdef int64_t idx[3]
    cdef int pos[3]
    cdef int choice[3]
    cdef int i, k, p, q, dp, dq, dest, src
    cdef Py_ssize_t j, L = leaves.shape[0]
    cdef int status = RUNNING
    for j in range(L):
        n += leaves[j]
        if leaves[j] > leafmax:
            leafmax = leaves[j]
    if root == n or leafmax == n:
        return root, 0, CONVERGED
    with bit_generator.lock, nogil:
        while steps < max_steps:
            for i in range(3):
                idx[i] = <int64_t>_bounded(rng, <uint64_t>n)
                pos[i] = _star_position(root, leaves, idx[i])
            for i in range(3):
                if i == 0:
                    p = pos[1]
                    q = pos[2]
                elif i == 1:
                    p = pos[0]
                    q = pos[2]
                else:
                    p = pos[0]
                    q = pos[1]
                dp = _star_dist(pos[i], p)
                dq = _star_dist(pos[i], q)
                if dp < dq:
                    choice[i] = p
                elif dq < dp:
                    choice[i] = q
                else:
                    choice[i] = q if _coin(rng) else p
            dest = <int>_tally(choice[0], choice[1], choice[2])
            if dest != NO_DECISION:
                for k in range(3):
                    if (k >= 1 and idx[k] == idx[0]) or (k == 2 and idx[2] == idx[1]):
                        continue
                    src = pos[k]
                    if src == dest:
                        continue
                    if src == 0:
                        root -= 1
                    else:
                        leaves[src - 1] -= 1
                    if dest == 0:
                        root += 1
                    else:
                        leaves[dest - 1] += 1
            if concentrate:
                _concentrate(leaves)
            steps += 1
            leafmax = 0
            for j in range(L):
                if leaves[j] > leafmax:
                    leafmax = leaves[j]
            if root == n or leafmax == n:
                status = CONVERGED
                break
    return root, steps, status


def first_bad_triple(const int32_t[:, ::1] dist):
    """First x < y < z whose pairwise intervals do not meet in exactly one node, else None."""
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t x, y, z, w, k, m
    cdef int32_t dxy, target
    cdef int hits
    cdef int64_t[::1] interval = np.empty(n, dtype=np.int64)
    with nogil:
        for x in range(n):
            for y in range(x + 1, n):
                dxy = dist[x, y]
                m = 0
                for w in range(n):
                    if dist[x, w] + dist[w, y] == dxy:
                        interval[m] = w
                        m += 1
                for z in range(y + 1, n):
                    target = dist[x, z] + dist[y, z] - dxy
                    hits = 0
                    for k in range(m):
                        if 2 * dist[interval[k], z] == target:
                            hits += 1
                            if hits > 1:
                                break
                    if hits != 1:
                        with gil:
                            return (x, y, z)
    return None
