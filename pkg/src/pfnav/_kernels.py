"""JIT-compiled inner loops for grid geodesics and ray marching.

All kernels work in cell units on C-contiguous arrays; callers scale by the
map resolution.
"""
import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)

# neighbour order: axial first, then diagonal
_DR = np.array([-1, 0, 0, 1, -1, -1, 1, 1], dtype=np.int64)
_DC = np.array([0, -1, 1, 0, -1, 1, -1, 1], dtype=np.int64)


@njit(cache=True, inline="always")
def _push(hk, hi, size, k, i):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if hk[parent] <= k:
            break
        hk[pos] = hk[parent]
        hi[pos] = hi[parent]
        pos = parent
    hk[pos] = k
    hi[pos] = i
    return size + 1


@njit(cache=True, inline="always")
def _pop(hk, hi, size):
    # removes the root; caller reads hk[0], hi[0] first
    size -= 1
    k = hk[size]
    i = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and hk[child + 1] < hk[child]:
            child += 1
        if hk[child] >= k:
            break
        hk[pos] = hk[child]
        hi[pos] = hi[child]
        pos = child
    hk[pos] = k
    hi[pos] = i
    return size


@njit(cache=True)
def _grow(hk, hi):
    nk = np.empty(2 * hk.shape[0])
    ni = np.empty(2 * hi.shape[0], dtype=np.int64)
    nk[:hk.shape[0]] = hk
    ni[:hi.shape[0]] = hi
    return nk, ni


@njit(cache=True)
def octile_dijkstra(traversable, sources, targets, stop_after):
    """Multi-source octile Dijkstra.

    Returns (axial, diagonal) step counts of the optimal path to every cell,
    -1 where never reached. Distances are compared as ``a + b*sqrt(2)``,
    which is unique per (a, b) pair, so the counts are canonical.

    When ``stop_after`` > 0 the search ends once that many cells flagged in
    ``targets`` are settled and every cell at the same distance as the last
    of them is settled too; cells beyond the settled set then hold
    tentative (upper-bound) counts.
    """
    h, w = traversable.shape
    n = h * w
    axial = np.full(n, -1, dtype=np.int64)
    diag = np.full(n, -1, dtype=np.int64)
    key = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    cap = n + len(sources) + 16
    hk = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    size = 0
    for s in sources:
        if key[s] != 0.0:
            key[s] = 0.0
            axial[s] = 0
            diag[s] = 0
            size = _push(hk, hi, size, 0.0, s)
    limit = np.inf
    while size > 0:
        if hk[0] > limit:
            break
        idx = hi[0]
        size = _pop(hk, hi, size)
        if done[idx]:
            continue
        done[idx] = True
        if stop_after > 0 and targets[idx]:
            stop_after -= 1
            if stop_after == 0:
                limit = key[idx]
        r = idx // w
        c = idx - r * w
        a0 = axial[idx]
        b0 = diag[idx]
        for k in range(8):
            nr = r + _DR[k]
            nc = c + _DC[k]
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if not traversable[nr, nc]:
                continue
            if k >= 4 and not traversable[r, nc] and not traversable[nr, c]:
                continue
            nidx = nr * w + nc
            if done[nidx]:
                continue
            if k < 4:
                a1 = a0 + 1
                b1 = b0
            else:
                a1 = a0
                b1 = b0 + 1
            nd = a1 + b1 * SQRT2
            if nd < key[nidx]:
                key[nidx] = nd
                axial[nidx] = a1
                diag[nidx] = b1
                if size == hk.shape[0]:
                    hk, hi = _grow(hk, hi)
                size = _push(hk, hi, size, nd, nidx)
    return axial.reshape(h, w), diag.reshape(h, w)


@njit(cache=True)
def _solve_upwind(a, b):
    # first-order update with unit speed and unit spacing
    if math.isinf(b):
        return a + 1.0
    if math.isinf(a):
        return b + 1.0
    if abs(a - b) >= 1.0:
        return min(a, b) + 1.0
    return 0.5 * (a + b + math.sqrt(2.0 - (a - b) * (a - b)))


@njit(cache=True)
def fast_marching(traversable, sources):
    """First-order fast marching on a 4-neighbour upwind stencil, unit speed."""
    h, w = traversable.shape
    n = h * w
    dist = np.full(n, np.inf)
    frozen = np.zeros(n, dtype=np.bool_)
    cap = n + 9 * len(sources) + 16
    hk = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    size = 0
    for s in sources:
        dist[s] = 0.0
        size = _push(hk, hi, size, 0.0, s)
    # exact distances next to each source remove the point-source bias
    for s in sources:
        r = s // w
        c = s - r * w
        for k in range(8):
            nr = r + _DR[k]
            nc = c + _DC[k]
            if nr < 0 or nr >= h or nc < 0 or nc >= w or not traversable[nr, nc]:
                continue
            if k >= 4 and not traversable[r, nc] and not traversable[nr, c]:
                continue
            d0 = 1.0 if k < 4 else SQRT2
            nidx = nr * w + nc
            if d0 < dist[nidx]:
                dist[nidx] = d0
                size = _push(hk, hi, size, d0, nidx)
    while size > 0:
        d = hk[0]
        idx = hi[0]
        size = _pop(hk, hi, size)
        if frozen[idx] or d > dist[idx]:
            continue
        frozen[idx] = True
        r = idx // w
        c = idx - r * w
        for k in range(4):
            nr = r + _DR[k]
            nc = c + _DC[k]
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if not traversable[nr, nc]:
                continue
            nidx = nr * w + nc
            if frozen[nidx]:
                continue
            # smallest frozen neighbour along each axis
            a = np.inf
            if nr > 0 and frozen[nidx - w]:
                a = dist[nidx - w]
            if nr < h - 1 and frozen[nidx + w]:
                a = min(a, dist[nidx + w])
            b = np.inf
            if nc > 0 and frozen[nidx - 1]:
                b = dist[nidx - 1]
            if nc < w - 1 and frozen[nidx + 1]:
                b = min(b, dist[nidx + 1])
            nd = _solve_upwind(a, b)
            if nd < dist[nidx]:
                dist[nidx] = nd
                if size == hk.shape[0]:
                    hk, hi = _grow(hk, hi)
                size = _push(hk, hi, size, nd, nidx)
    return dist.reshape(h, w)


@njit(cache=True)
def descend(dist, axial_cost, diag_cost, r, c, max_steps):
    """Follow the cheapest predecessor (dist[n] + step) until a zero cell.

    Ties within 1e-9 go to the smallest (row, col). Returns an (m, 2) array
    of cells, or an empty array if descent stalls.
    """
    h, w = dist.shape
    out = np.empty((max_steps + 1, 2), dtype=np.int64)
    out[0, 0] = r
    out[0, 1] = c
    m = 1
    while dist[r, c] > 0.0:
        if m > max_steps:
            return out[:0]
        best = np.inf
        br = -1
        bc = -1
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                nr = r + dr
                nc = c + dc
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                dn = dist[nr, nc]
                if math.isinf(dn) or dn >= dist[r, c]:
                    continue
                if dr != 0 and dc != 0:
                    if math.isinf(dist[r, nc]) and math.isinf(dist[nr, c]):
                        continue
                    cand = dn + diag_cost
                else:
                    cand = dn + axial_cost
                if cand < best - 1e-9:
                    best = cand
                    br = nr
                    bc = nc
                elif cand <= best + 1e-9 and (nr < br or (nr == br and nc < bc)):
                    br = nr
                    bc = nc
        if br < 0:
            return out[:0]
        r = br
        c = bc
        out[m, 0] = r
        out[m, 1] = c
        m += 1
    return out[:m]


@njit(cache=True)
def march_rays(obstacle, r0, c0, angles, max_range, step, out):
    """March rays from the centre of (r0, c0); mark every cell passed,
    including the first obstacle cell, which stops the ray.

    Angles are radians, counter-clockwise from +col with rows growing down.
    """
    h, w = obstacle.shape
    y0 = r0 + 0.5
    x0 = c0 + 0.5
    for i in range(angles.shape[0]):
        dy = -math.sin(angles[i])
        dx = math.cos(angles[i])
        t = 0.0
        while t <= max_range:
            rr = int(math.floor(y0 + t * dy))
            cc = int(math.floor(x0 + t * dx))
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                break
            out[rr, cc] = True
            if obstacle[rr, cc]:
                break
            t += step


@njit(cache=True)
def segment_cells(r0, c0, r1, c1, step):
    """Cells touched by the centre-to-centre segment, sampled every ``step`` cells."""
    length = math.hypot(r1 - r0, c1 - c0)
    n = int(math.ceil(length / step)) + 1
    out = np.empty((n + 1, 2), dtype=np.int64)
    m = 0
    for i in range(n + 1):
        t = min(1.0, i * step / length) if length > 0 else 1.0
        rr = int(math.floor(r0 + 0.5 + t * (r1 - r0)))
        cc = int(math.floor(c0 + 0.5 + t * (c1 - c0)))
        if m == 0 or out[m - 1, 0] != rr or out[m - 1, 1] != cc:
            out[m, 0] = rr
            out[m, 1] = cc
            m += 1
    return out[:m]
