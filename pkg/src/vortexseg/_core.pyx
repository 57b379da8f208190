# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kNN kernels: the hot inner loops of graph construction.

Mirrors vortexseg._core_py exactly: squared distances accumulate
dimension by dimension in float64 (the build forbids FMA contraction so
the rounding matches numpy), candidates rank by (distance, index) and
the k best come back ordered. Keep both files in sync.
"""

import numpy as np

from libc.math cimport ceil, sqrt


cdef inline bint _worse(double d1, long j1, double d2, long j2) nogil:
    # True when (d1, j1) ranks after (d2, j2)
    return d1 > d2 or (d1 == d2 and j1 > j2)


cdef void _heap_sift_down(double* hd, long* hj, int size, int root) nogil:
    # max-heap on (distance, index): the root is the worst kept candidate
    cdef int child
    cdef double dv = hd[root]
    cdef long jv = hj[root]
    while True:
        child = 2 * root + 1
        if child >= size:
            break
        if child + 1 < size and _worse(hd[child + 1], hj[child + 1],
                                       hd[child], hj[child]):
            child += 1
        if _worse(dv, jv, hd[child], hj[child]):
            break
        hd[root] = hd[child]
        hj[root] = hj[child]
        root = child
    hd[root] = dv
    hj[root] = jv


cdef void _heap_build(double* hd, long* hj, int size) nogil:
    cdef int i
    for i in range(size // 2 - 1, -1, -1):
        _heap_sift_down(hd, hj, size, i)


cdef void _heap_sort_ascending(double* hd, long* hj, int size) nogil:
    # pop the worst to the back until the buffer is (distance, index) ascending
    cdef int end
    cdef double dv
    cdef long jv
    for end in range(size - 1, 0, -1):
        dv = hd[0]; jv = hj[0]
        hd[0] = hd[end]; hj[0] = hj[end]
        hd[end] = dv; hj[end] = jv
        _heap_sift_down(hd, hj, end, 0)


def knn_bruteforce(double[:, ::1] x, int k):
    cdef Py_ssize_t n = x.shape[0]
    cdef int d = x.shape[1]
    out_arr = np.empty((n, k), dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    heap_d_arr = np.empty(k, dtype=np.float64)
    heap_j_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] hd = heap_d_arr
    cdef long[::1] hj = heap_j_arr

    cdef Py_ssize_t i, j
    cdef int dim, size, m
    cdef double acc, diff
    with nogil:
        for i in range(n):
            size = 0
            for j in range(n):
                if j == i:
                    continue
                acc = 0.0
                for dim in range(d):
                    diff = x[i, dim] - x[j, dim]
                    acc = acc + diff * diff
                if size < k:
                    hd[size] = acc
                    hj[size] = j
                    size += 1
                    if size == k:
                        _heap_build(&hd[0], &hj[0], k)
                elif _worse(hd[0], hj[0], acc, j):
                    hd[0] = acc
                    hj[0] = j
                    _heap_sift_down(&hd[0], &hj[0], k, 0)
            _heap_sort_ascending(&hd[0], &hj[0], k)
            for m in range(k):
                out[i, m] = <int> hj[m]
    return out_arr


def knn_grid(double[:, ::1] x, int k):
    cdef Py_ssize_t n = x.shape[0]
    cdef double lo0 = x[0, 0], lo1 = x[0, 1], hi0 = x[0, 0], hi1 = x[0, 1]
    cdef Py_ssize_t i
    for i in range(1, n):
        if x[i, 0] < lo0: lo0 = x[i, 0]
        if x[i, 0] > hi0: hi0 = x[i, 0]
        if x[i, 1] < lo1: lo1 = x[i, 1]
        if x[i, 1] > hi1: hi1 = x[i, 1]

    cdef double span = hi0 - lo0
    if hi1 - lo1 > span:
        span = hi1 - lo1
    cdef double side
    if span <= 0.0:
        side = 1.0
    else:
        side = span / ceil(sqrt(n / 2.0))
    cdef long nx = <long> ((hi0 - lo0) / side) + 1
    cdef long ny = <long> ((hi1 - lo1) / side) + 1

    cdef long[::1] cx = np.empty(n, dtype=np.int64)
    cdef long[::1] cy = np.empty(n, dtype=np.int64)
    cdef long c
    for i in range(n):
        c = <long> ((x[i, 0] - lo0) / side)
        cx[i] = c if c < nx - 1 else nx - 1
        c = <long> ((x[i, 1] - lo1) / side)
        cy[i] = c if c < ny - 1 else ny - 1

    # CSR buckets: starts[cell] .. starts[cell+1] index into `order`,
    # point indices ascending within each bucket
    cdef long ncells = nx * ny
    cdef long[::1] starts = np.zeros(ncells + 1, dtype=np.int64)
    for i in range(n):
        starts[cy[i] * nx + cx[i] + 1] += 1
    for c in range(ncells):
        starts[c + 1] += starts[c]
    cdef long[::1] fill = starts.copy()
    cdef long[::1] order = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = cy[i] * nx + cx[i]
        order[fill[c]] = i
        fill[c] += 1

    out_arr = np.empty((n, k), dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    heap_d_arr = np.empty(k, dtype=np.float64)
    heap_j_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] hd = heap_d_arr
    cdef long[::1] hj = heap_j_arr

    cdef long max_ring = nx if nx > ny else ny
    cdef long ring, xx, yy, x0, x1, y0, y1, cell, p
    cdef Py_ssize_t j
    cdef int size, m
    cdef double acc, diff, bound
    cdef bint done
    with nogil:
        for i in range(n):
            size = 0
            done = False
            for ring in range(max_ring + 1):
                x0 = cx[i] - ring; x1 = cx[i] + ring
                y0 = cy[i] - ring; y1 = cy[i] + ring
                for yy in range(y0 if y0 > 0 else 0,
                                (y1 if y1 < ny - 1 else ny - 1) + 1):
                    for xx in range(x0 if x0 > 0 else 0,
                                    (x1 if x1 < nx - 1 else nx - 1) + 1):
                        if ring > 0 and x0 < xx < x1 and y0 < yy < y1:
                            continue  # interior already visited
                        cell = yy * nx + xx
                        for p in range(starts[cell], starts[cell + 1]):
                            j = order[p]
                            if j == i:
                                continue
                            acc = 0.0
                            diff = x[i, 0] - x[j, 0]
                            acc = acc + diff * diff
                            diff = x[i, 1] - x[j, 1]
                            acc = acc + diff * diff
                            if size < k:
                                hd[size] = acc
                                hj[size] = j
                                size += 1
                                if size == k:
                                    _heap_build(&hd[0], &hj[0], k)
                            elif _worse(hd[0], hj[0], acc, j):
                                hd[0] = acc
                                hj[0] = j
                                _heap_sift_down(&hd[0], &hj[0], k, 0)
                if size == k:
                    # points beyond this ring sit at least ring*side away;
                    # the margin mirrors _core_py and absorbs rounding
                    bound = ring * side
                    if hd[0] < bound * bound * (1.0 - 1e-9):
                        done = True
                        break
            if not done and size < k:
                with gil:
                    raise AssertionError("grid sweep ended with fewer than k points")
            _heap_sort_ascending(&hd[0], &hj[0], k)
            for m in range(k):
                out[i, m] = <int> hj[m]
    return out_arr
