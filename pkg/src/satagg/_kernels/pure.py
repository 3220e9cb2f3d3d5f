"""Pure-Python Dijkstra kernel; semantics identical to the compiled version.

Heap entries are (distance, node) so cost ties pop in ascending node order,
and predecessors update only on strict improvement: path choice is fully
deterministic and bit-identical across both kernels.
"""
import heapq

import numpy as np


def shortest_path_csr(indptr, indices, weights, source, target=-1):
    """Single-source shortest paths on a CSR digraph with weights >= 0.

    Returns (dist, pred) arrays; pred[v] = -1 for the source and unreached
    nodes. If target >= 0 the search stops once the target is settled, so
    dist/pred entries for nodes farther than the target are partial.
    """
    n = len(indptr) - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int32)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == target:
            break
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = d + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred
