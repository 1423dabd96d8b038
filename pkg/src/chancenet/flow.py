"""Max flow / min cut on directed networks (Dinic's algorithm).

Kept free of any model imports so the simulator can call it in a tight
loop: the interface is plain arrays (tails, heads, capacities).  The min
cut is recovered from the final residual graph as the set of nodes BFS
can still reach from the source, which makes the reported cut a
deterministic function of the input.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = ["MaxFlowResult", "dinic_max_flow"]


class MaxFlowResult:
    __slots__ = ("value", "source_side", "flow")

    def __init__(self, value: float, source_side: frozenset[int], flow: np.ndarray):
        self.value = value
        self.source_side = source_side
        self.flow = flow


def dinic_max_flow(
    n_nodes: int,
    tails: np.ndarray,
    heads: np.ndarray,
    capacities: np.ndarray,
    source: int,
    sink: int,
    eps: float = 1e-12,
) -> MaxFlowResult:
    """Maximum s-t flow with real capacities; capacities below eps are dead.

    Returns the flow value, the source side of a minimum cut (residual
    reachability), and the per-arc flow in input arc order.
    """

    m = len(tails)
    # Forward edge 2k, backward edge 2k+1, interleaved residual arrays.
    ecap = np.zeros(2 * m)
    ecap[0::2] = np.maximum(capacities, 0.0)
    eto = np.empty(2 * m, dtype=np.int64)
    eto[0::2] = heads
    eto[1::2] = tails
    # CSR-style adjacency over edge ids.
    deg = np.zeros(n_nodes, dtype=np.int64)
    for k in range(m):
        deg[tails[k]] += 1
        deg[heads[k]] += 1
    start = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(deg, out=start[1:])
    adj = np.empty(2 * m, dtype=np.int64)
    fill = start[:-1].copy()
    for k in range(m):
        adj[fill[tails[k]]] = 2 * k
        fill[tails[k]] += 1
        adj[fill[heads[k]]] = 2 * k + 1
        fill[heads[k]] += 1

    level = np.empty(n_nodes, dtype=np.int64)
    it = np.empty(n_nodes, dtype=np.int64)
    total = 0.0

    def bfs() -> bool:
        level.fill(-1)
        level[source] = 0
        dq = deque([source])
        while dq:
            u = dq.popleft()
            for p in range(start[u], start[u + 1]):
                e = adj[p]
                v = eto[e]
                if level[v] < 0 and ecap[e] > eps:
                    level[v] = level[u] + 1
                    dq.append(v)
        return level[sink] >= 0

    def dfs(u: int, pushed: float) -> float:
        if u == sink:
            return pushed
        while it[u] < start[u + 1]:
            e = adj[it[u]]
            v = eto[e]
            if ecap[e] > eps and level[v] == level[u] + 1:
                got = dfs(v, min(pushed, ecap[e]))
                if got > eps:
                    ecap[e] -= got
                    ecap[e ^ 1] += got
                    return got
            it[u] += 1
        return 0.0

    while bfs():
        it[:] = start[:-1]
        while True:
            pushed = dfs(source, float("inf"))
            if pushed <= eps:
                break
            total += pushed

    # Residual reachability gives the canonical min cut.
    seen = np.zeros(n_nodes, dtype=bool)
    seen[source] = True
    dq = deque([source])
    while dq:
        u = dq.popleft()
        for p in range(start[u], start[u + 1]):
            e = adj[p]
            v = eto[e]
            if not seen[v] and ecap[e] > eps:
                seen[v] = True
                dq.append(v)
    flow = ecap[1::2].copy()  # backward residual equals pushed flow
    return MaxFlowResult(total, frozenset(np.flatnonzero(seen).tolist()), flow)
