"""Pure-numpy kNN kernels, the fallback behind vortexseg.graph.

Both kernels implement the exact same contract as the compiled core in
_core.pyx: squared Euclidean distances accumulated dimension by
dimension in float64, self excluded, the k nearest selected and ordered
by (distance, index). The dimension-ordered accumulation is what makes
the two backends bit-identical, so keep the loop structure in sync with
the .pyx file when touching either.
"""

from __future__ import annotations

import numpy as np


def _select_row(d2_row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest (distance, index) pairs, in that order."""
    kth = np.partition(d2_row, k - 1)[k - 1]
    cand = np.nonzero(d2_row <= kth)[0]
    order = np.argsort(d2_row[cand], kind="stable")
    return cand[order[:k]]


def knn_bruteforce(x: np.ndarray, k: int) -> np.ndarray:
    n, d = x.shape
    out = np.empty((n, k), dtype=np.int32)
    # bound the chunk's distance matrix to ~128 MB
    chunk = max(1, min(n, 16_000_000 // n))
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        d2 = np.zeros((e - s, n))
        for dim in range(d):
            diff = x[s:e, dim, None] - x[None, :, dim]
            d2 += diff * diff
        d2[np.arange(e - s), np.arange(s, e)] = np.inf

        kth = np.partition(d2, k - 1, axis=1)[:, k - 1 : k]
        mask = d2 <= kth
        counts = mask.sum(axis=1)
        simple = counts == k
        if np.any(simple):
            cols = np.nonzero(mask[simple])[1].reshape(-1, k)
            vals = np.take_along_axis(d2[simple], cols, axis=1)
            order = np.argsort(vals, axis=1, kind="stable")
            out[s:e][simple] = np.take_along_axis(cols, order, axis=1)
        for i in np.nonzero(~simple)[0]:  # distance ties across the kth place
            out[s + i] = _select_row(d2[i], k)
    return out


def knn_grid(x: np.ndarray, k: int) -> np.ndarray:
    n = x.shape[0]
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    if span <= 0.0:  # all points coincide
        side = 1.0
    else:
        side = span / np.ceil(np.sqrt(n / 2.0))
    nx = int((hi[0] - lo[0]) / side) + 1
    ny = int((hi[1] - lo[1]) / side) + 1

    cx = np.minimum(((x[:, 0] - lo[0]) / side).astype(np.int64), nx - 1)
    cy = np.minimum(((x[:, 1] - lo[1]) / side).astype(np.int64), ny - 1)
    cid = cy * nx + cx
    counts = np.bincount(cid, minlength=nx * ny)
    starts = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    order = np.argsort(cid, kind="stable")  # index-ascending within each cell

    out = np.empty((n, k), dtype=np.int32)
    max_ring = max(nx, ny)
    for i in range(n):
        pool_idx: list[np.ndarray] = []
        pool_d2: list[np.ndarray] = []
        pooled = 0
        kth = np.inf
        for ring in range(max_ring + 1):
            cells = _ring_cells(int(cx[i]), int(cy[i]), ring, nx, ny)
            if cells.size:
                cand = np.concatenate(
                    [order[starts[c] : starts[c + 1]] for c in cells]
                )
                cand = cand[cand != i]
                if cand.size:
                    diff = x[cand, 0] - x[i, 0]
                    d2 = diff * diff
                    diff = x[cand, 1] - x[i, 1]
                    d2 += diff * diff
                    pool_idx.append(cand)
                    pool_d2.append(d2)
                    pooled += cand.size
            if pooled >= k:
                d2_all = np.concatenate(pool_d2)
                idx_all = np.concatenate(pool_idx)
                sel = _select_pool(d2_all, idx_all, k)
                kth = d2_all[sel[-1]]
                # everything beyond ring r is at least r*side away; the
                # 1e-9 relative margin absorbs rounding in the distance
                # accumulation so boundary ties fall to the next ring
                if kth < (ring * side) ** 2 * (1.0 - 1e-9):
                    break
                pool_idx = [idx_all]
                pool_d2 = [d2_all]
        else:
            d2_all = np.concatenate(pool_d2)
            idx_all = np.concatenate(pool_idx)
            sel = _select_pool(d2_all, idx_all, k)
        out[i] = idx_all[sel]
    return out


def _ring_cells(cx: int, cy: int, ring: int, nx: int, ny: int) -> np.ndarray:
    """Grid cell ids at Chebyshev distance `ring` from (cx, cy), clipped."""
    if ring == 0:
        return np.array([cy * nx + cx], dtype=np.int64)
    cells = []
    x0, x1 = cx - ring, cx + ring
    y0, y1 = cy - ring, cy + ring
    for xx in range(max(x0, 0), min(x1, nx - 1) + 1):
        if 0 <= y0:
            cells.append(y0 * nx + xx)
        if y1 <= ny - 1:
            cells.append(y1 * nx + xx)
    for yy in range(max(y0 + 1, 0), min(y1 - 1, ny - 1) + 1):
        if 0 <= x0:
            cells.append(yy * nx + x0)
        if x1 <= nx - 1:
            cells.append(yy * nx + x1)
    return np.asarray(cells, dtype=np.int64)


def _select_pool(d2: np.ndarray, idx: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k smallest (d2, idx) pairs, ordered."""
    order = np.lexsort((idx, d2))
    return order[:k]
