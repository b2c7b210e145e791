"""Pure-Python growth kernel (fallback for ``_fpp_core``).

Both kernels must agree bit for bit: same event order, same neighbour
order, same weight consumption order.
"""
from __future__ import annotations

import heapq

import numpy as np

# neighbour visiting order; fixes the order weights are drawn in
STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def grow(budget, refill, bound=-1, lookup=None):
    """Grow the infected set from the origin.

    ``refill()`` returns a fresh float64 array of edge weights, consumed in
    order whenever an edge is first touched. If ``lookup`` is given it is
    called as ``lookup(x0, y0, x1, y1)`` instead. ``bound >= 0`` truncates
    the lattice to the box ``|x|, |y| <= bound``.

    Returns ``(xs, ys, times, pops)`` with sites in infection order.
    """
    budget = int(budget)
    bound = int(bound)
    infected = {(0, 0): 0.0}
    xs = [0]
    ys = [0]
    times = [0.0]
    heap = []
    buf = None
    pos = 0

    def push_neighbours(t, x, y):
        nonlocal buf, pos
        for dx, dy in STEPS:
            nx = x + dx
            ny = y + dy
            if bound >= 0 and (nx > bound or nx < -bound or ny > bound or ny < -bound):
                continue
            if (nx, ny) in infected:
                continue
            if lookup is not None:
                w = float(lookup(x, y, nx, ny))
            else:
                if buf is None or pos >= len(buf):
                    buf = np.asarray(refill(), dtype=np.float64).tolist()
                    pos = 0
                    if not buf:
                        raise RuntimeError("weight refill returned an empty block")
                w = buf[pos]
                pos += 1
            heapq.heappush(heap, (t + w, nx, ny))

    pops = 0
    if budget > 0:
        push_neighbours(0.0, 0, 0)
    while pops < budget and heap:
        t, x, y = heapq.heappop(heap)
        pops += 1
        if (x, y) in infected:
            continue
        infected[(x, y)] = t
        xs.append(x)
        ys.append(y)
        times.append(t)
        push_neighbours(t, x, y)

    return (
        np.asarray(xs, dtype=np.int32),
        np.asarray(ys, dtype=np.int32),
        np.asarray(times, dtype=np.float64),
        pops,
    )
