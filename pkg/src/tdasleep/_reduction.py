"""Compiled kernels for the Rips H1 cohomology reduction.

Triangle keys are ``top * n + opp`` where ``top`` is the filtration index of
the triangle's longest edge and ``opp`` the vertex opposite to it. Column
additions are done lazily through a binary min-heap of keys in which equal
keys cancel in pairs (Z/2 coefficients); reduction columns (the edge
combinations) are stored instead of the dense reduced coboundaries.
"""
import numba
import numpy as np


@numba.njit(cache=True)
def _apparent_pairs(pos, eu, ev):
    """For each edge, the smallest vertex w whose triangle has the edge as its
    longest side, or -1 when there is none."""
    n = pos.shape[0]
    m = eu.shape[0]
    out = np.full(m, -1, dtype=np.int64)
    for e in range(m):
        u = eu[e]
        v = ev[e]
        for w in range(n):
            a = pos[u, w]
            b = pos[v, w]
            if a >= 0 and b >= 0 and a < e and b < e:
                out[e] = w
                break
    return out


@numba.njit(cache=True)
def _heap_push(heap, size, x):
    if size == heap.shape[0]:
        grown = np.empty(2 * heap.shape[0], dtype=np.int64)
        grown[:size] = heap[:size]
        heap = grown
    i = size
    heap[i] = x
    while i > 0:
        p = (i - 1) >> 1
        if heap[p] <= heap[i]:
            break
        heap[p], heap[i] = heap[i], heap[p]
        i = p
    return heap, size + 1


@numba.njit(cache=True)
def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        c = l
        r = l + 1
        if r < size and heap[r] < heap[l]:
            c = r
        if heap[i] <= heap[c]:
            break
        heap[i], heap[c] = heap[c], heap[i]
        i = c
    return top, size


@numba.njit(cache=True)
def _push_coboundary(heap, size, pos, eu, ev, e):
    n = pos.shape[0]
    m = eu.shape[0]
    u = eu[e]
    v = ev[e]
    for w in range(n):
        a = pos[u, w]
        b = pos[v, w]
        if a < 0 or b < 0 or a >= m or b >= m:
            continue
        top = e
        opp = w
        if a > top:
            top = a
            opp = v
        if b > top:
            top = b
            opp = u
        heap, size = _heap_push(heap, size, top * n + opp)
    return heap, size


@numba.njit(cache=True)
def _pop_pivot(heap, size):
    while size > 0:
        x, size = _heap_pop(heap, size)
        if size > 0 and heap[0] == x:
            x, size = _heap_pop(heap, size)
            continue
        return x, size
    return -1, size


@numba.njit(cache=True)
def _reduce_cohomology(pos, eu, ev, apparent_w, todo):
    n = pos.shape[0]
    owner = dict()
    owner[np.int64(-1)] = np.int64(-1)
    # reduction columns, stored flat with per-owner offsets
    v_start = np.zeros(len(todo) + 1, dtype=np.int64)
    v_flat = np.empty(max(16, len(todo)), dtype=np.int64)
    v_used = 0
    slot_of = dict()
    slot_of[np.int64(-1)] = np.int64(-1)
    births = np.empty(len(todo), dtype=np.int64)
    deaths = np.empty(len(todo), dtype=np.int64)
    heap = np.empty(1024, dtype=np.int64)
    work = np.empty(64, dtype=np.int64)
    n_out = 0
    n_slots = 0
    for e in todo:
        size = 0
        heap, size = _push_coboundary(heap, size, pos, eu, ev, e)
        work[0] = e
        n_work = 1
        while True:
            piv, size = _pop_pivot(heap, size)
            if piv < 0:
                break
            top = piv // n
            opp = piv % n
            if top != e and apparent_w[top] == opp:
                heap, size = _heap_push(heap, size, piv)
                heap, size = _push_coboundary(heap, size, pos, eu, ev, top)
                if n_work == work.shape[0]:
                    g = np.empty(2 * n_work, dtype=np.int64)
                    g[:n_work] = work[:n_work]
                    work = g
                work[n_work] = top
                n_work += 1
                continue
            k = owner.get(piv, np.int64(-1))
            if k >= 0:
                heap, size = _heap_push(heap, size, piv)
                s = slot_of[k]
                for j in range(v_start[s], v_start[s + 1]):
                    f = v_flat[j]
                    heap, size = _push_coboundary(heap, size, pos, eu, ev, f)
                    if n_work == work.shape[0]:
                        g = np.empty(2 * n_work, dtype=np.int64)
                        g[:n_work] = work[:n_work]
                        work = g
                    work[n_work] = f
                    n_work += 1
                continue
            break
        births[n_out] = e
        if piv < 0:
            deaths[n_out] = -1
        else:
            deaths[n_out] = piv // n
            owner[piv] = e
            # store the reduction column mod 2
            col = np.sort(work[:n_work])
            if v_used + n_work > v_flat.shape[0]:
                g = np.empty(2 * (v_used + n_work), dtype=np.int64)
                g[:v_used] = v_flat[:v_used]
                v_flat = g
            i = 0
            while i < n_work:
                j = i
                while j < n_work and col[j] == col[i]:
                    j += 1
                if (j - i) % 2 == 1:
                    v_flat[v_used] = col[i]
                    v_used += 1
                i = j
            slot_of[e] = n_slots
            n_slots += 1
            v_start[n_slots] = v_used
        n_out += 1
    return births[:n_out], deaths[:n_out]
