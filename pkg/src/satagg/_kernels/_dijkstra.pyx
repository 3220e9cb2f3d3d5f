# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled Dijkstra kernel over CSR arrays; mirrors pure.shortest_path_csr.

Uses a max-heap of (-distance, -node) pairs so that equal-cost entries pop in
ascending node order, matching the pure kernel's (distance, node) min-heap.
"""
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue

import numpy as np


def shortest_path_csr(indptr, indices, weights, int source, int target=-1):
    cdef int[::1] iptr = np.ascontiguousarray(indptr, dtype=np.int32)
    cdef int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = iptr.shape[0] - 1

    dist_arr = np.full(n, np.inf)
    pred_arr = np.full(n, -1, dtype=np.int32)
    cdef double[::1] dist = dist_arr
    cdef int[::1] pred = pred_arr

    cdef priority_queue[pair[double, long]] heap
    cdef pair[double, long] top
    cdef double d, nd
    cdef long u
    cdef int v
    cdef Py_ssize_t k

    dist[source] = 0.0
    heap.push(pair[double, long](0.0, -<long>source))
    while not heap.empty():
        top = heap.top()
        heap.pop()
        d = -top.first
        u = -top.second
        if d > dist[u]:
            continue
        if u == target:
            break
        for k in range(iptr[u], iptr[u + 1]):
            v = idx[k]
            nd = d + w[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heap.push(pair[double, long](-nd, -<long>v))
    return dist_arr, pred_arr
