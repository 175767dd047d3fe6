"""Exact s-t minimum cut on directed graphs with non-negative float capacities.

Dinic's algorithm (BFS level graph + blocking flow with current-arc pointers),
compiled with numba.  The public entry point is :func:`min_cut`.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _dinic(n, first, nxt_head, cap, rev, source, sink, eps):
    flow = 0.0
    level = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    it = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    arc_stack = np.empty(n, dtype=np.int64)

    while True:
        level[:] = -1
        level[source] = 0
        qh = 0
        qt = 1
        queue[0] = source
        while qh < qt:
            u = queue[qh]
            qh += 1
            for a in range(first[u], first[u + 1]):
                v = nxt_head[a]
                if level[v] < 0 and cap[a] > eps:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[sink] < 0:
            break

        for u in range(n):
            it[u] = first[u]

        # iterative DFS for blocking flow
        while True:
            depth = 0
            stack[0] = source
            found = False
            while depth >= 0:
                u = stack[depth]
                if u == sink:
                    found = True
                    break
                advanced = False
                while it[u] < first[u + 1]:
                    a = it[u]
                    v = nxt_head[a]
                    if cap[a] > eps and level[v] == level[u] + 1:
                        arc_stack[depth] = a
                        depth += 1
                        stack[depth] = v
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    level[u] = -1  # dead end
                    depth -= 1
                    if depth >= 0:
                        it[stack[depth]] += 1
            if not found:
                break
            push = np.inf
            for d in range(depth):
                c = cap[arc_stack[d]]
                if c < push:
                    push = c
            for d in range(depth):
                a = arc_stack[d]
                cap[a] -= push
                cap[rev[a]] += push
            flow += push

    reach = np.zeros(n, dtype=np.bool_)
    reach[source] = True
    qh = 0
    qt = 1
    queue[0] = source
    while qh < qt:
        u = queue[qh]
        qh += 1
        for a in range(first[u], first[u + 1]):
            v = nxt_head[a]
            if not reach[v] and cap[a] > eps:
                reach[v] = True
                queue[qt] = v
                qt += 1
    return flow, reach


def min_cut(n_nodes, tails, heads, caps, source, sink):
    """Return ``(cut_value, source_side)`` for the minimum s-t cut.

    ``tails``, ``heads`` and ``caps`` describe directed arcs; parallel arcs are
    allowed.  ``source_side[v]`` is True for nodes reachable from the source in
    the final residual graph (the minimal source set).
    """
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    caps = np.asarray(caps, dtype=np.float64)
    if tails.shape != heads.shape or tails.shape != caps.shape:
        raise ValueError("tails, heads and caps must have equal length")
    if caps.size and (np.any(caps < 0) or np.any(np.isnan(caps))):
        raise ValueError("capacities must be non-negative")
    if not (0 <= source < n_nodes and 0 <= sink < n_nodes) or source == sink:
        raise ValueError("bad source/sink")

    m = tails.size
    # arc 2k is the forward arc, 2k+1 its residual twin
    all_tail = np.empty(2 * m, dtype=np.int64)
    all_head = np.empty(2 * m, dtype=np.int64)
    all_cap = np.zeros(2 * m, dtype=np.float64)
    all_tail[0::2] = tails
    all_tail[1::2] = heads
    all_head[0::2] = heads
    all_head[1::2] = tails
    all_cap[0::2] = caps

    order = np.argsort(all_tail, kind="stable")
    pos = np.empty(2 * m, dtype=np.int64)
    pos[order] = np.arange(2 * m)
    twin = np.arange(2 * m) ^ 1
    rev = pos[twin[order]]
    first = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(all_tail, minlength=n_nodes), out=first[1:])

    finite = caps[np.isfinite(caps)]
    scale = float(finite.sum()) if finite.size else 1.0
    eps = 1e-13 * max(scale, 1.0)
    flow, reach = _dinic(
        n_nodes, first, all_head[order], all_cap[order].copy(), rev, source, sink, eps
    )
    return float(flow), reach
