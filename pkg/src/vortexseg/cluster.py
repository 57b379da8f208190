"""Refine per-point segmentation into per-vortex detections.

Each vortex class is clustered independently in the (y, z) plane; the
surviving clusters' arithmetic-mean centers become the reported vortex
positions. Three interchangeable algorithms:

  * agglomerative: bottom-up Ward merging, stopped once the cheapest
    variance increase exceeds the squared linkage threshold (the vortex
    count per scan is unknown, so no fixed cluster count);
  * dbscan: density clustering, min_pts counted with the point itself;
  * optics: density ordering up to eps_max plus a DBSCAN-style
    extraction at a chosen eps.

All tie-breaks are pinned to indices so results are reproducible:
cluster ids follow the lowest involved point index, DBSCAN border
points join the first cluster that reaches them in index-ordered
expansion, OPTICS pops equal reachabilities in index order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .dataio import PointCloud
from .synth import PORT, STARBOARD

NOISE = -1

ALGORITHMS = ("agglomerative", "dbscan", "optics")


@dataclass(frozen=True)
class ClusterParams:
    algorithm: str = "agglomerative"
    linkage_threshold: float = 30.0  # meters, Ward stop criterion
    eps: float = 12.0  # meters, DBSCAN neighborhood
    min_pts: int = 10
    optics_eps_max: float = 60.0
    optics_eps: float = 12.0  # extraction radius
    min_cluster_size: int = 20

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown clustering algorithm {self.algorithm!r}")
        if min(self.linkage_threshold, self.eps, self.optics_eps_max,
               self.optics_eps) <= 0:
            raise ValueError("distance thresholds must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")
        if self.optics_eps > self.optics_eps_max:
            raise ValueError("extraction eps cannot exceed eps_max")


@dataclass
class ClusterResult:
    assignment: np.ndarray  # int64 per point: cluster id or NOISE
    clusters: list[tuple[int, tuple[float, float]]]  # (size, centroid)


@dataclass(frozen=True)
class Detection:
    vortex_class: int  # PORT or STARBOARD
    center: tuple[float, float]
    support: int


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (m, 2), got {pts.shape}")
    return pts


def _result_from_labels(pts: np.ndarray, labels: np.ndarray) -> ClusterResult:
    clusters = []
    for cid in range(labels.max() + 1 if labels.size else 0):
        members = labels == cid
        size = int(members.sum())
        centroid = pts[members].mean(axis=0)
        clusters.append((size, (float(centroid[0]), float(centroid[1]))))
    return ClusterResult(assignment=labels, clusters=clusters)


# ---------------------------------------------------------------------------
# Ward agglomerative


def agglomerative_ward(points, linkage_threshold: float,
                       merge_trace: list | None = None) -> ClusterResult:
    """Greedy bottom-up merging by minimum Ward variance increase.

    Merge cost between clusters A and B is the Ward criterion
    |A||B|/(|A|+|B|) * ||mean_A - mean_B||^2; a pair is mergeable while
    its centroid distance stays within linkage_threshold (the size-free
    gate keeps the threshold in meters, so labeled disks coalesce while
    far clusters never join regardless of how big they grow). Merging
    stops when the cheapest merge exceeds the gate. Cost ties resolve
    by the lower (then the other) minimum member index. No noise label.

    `merge_trace`, when given, collects each merged cluster as a
    frozenset of point indices, in merge order.
    """
    pts = _as_points(points)
    m = len(pts)
    if m == 0:
        return ClusterResult(np.empty(0, dtype=np.int64), [])
    size = np.ones(m)
    centroid = pts.copy()
    alive = np.ones(m, dtype=bool)
    members: list[list[int]] = [[i] for i in range(m)]
    threshold2 = float(linkage_threshold) ** 2

    # full matrices; merged clusters always land in the lower slot, so
    # slot index == minimum member index and row-major argmin applies the
    # documented tie-break for free
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = (diff**2).sum(axis=2)
    cost = 0.5 * dist2
    np.fill_diagonal(dist2, np.inf)
    np.fill_diagonal(cost, np.inf)

    while alive.sum() > 1:
        eligible = np.where(dist2 <= threshold2, cost, np.inf)
        flat = np.argmin(eligible)
        a, b = np.unravel_index(flat, cost.shape)
        if not np.isfinite(eligible[a, b]):
            break
        a, b = min(a, b), max(a, b)
        total = size[a] + size[b]
        centroid[a] = (size[a] * centroid[a] + size[b] * centroid[b]) / total
        size[a] = total
        members[a].extend(members[b])
        if merge_trace is not None:
            merge_trace.append(frozenset(members[a]))
        alive[b] = False
        cost[b, :] = np.inf
        cost[:, b] = np.inf
        dist2[b, :] = np.inf
        dist2[:, b] = np.inf
        others = alive.copy()
        others[a] = False
        if others.any():
            d2 = ((centroid[others] - centroid[a]) ** 2).sum(axis=1)
            dist2[a, others] = d2
            dist2[others, a] = d2
            new_cost = size[a] * size[others] / (size[a] + size[others]) * d2
            cost[a, others] = new_cost
            cost[others, a] = new_cost

    labels = np.empty(m, dtype=np.int64)
    clusters = []
    for cid, slot in enumerate(np.nonzero(alive)[0]):
        labels[members[slot]] = cid
        clusters.append((int(size[slot]),
                         (float(centroid[slot, 0]), float(centroid[slot, 1]))))
    return ClusterResult(assignment=labels, clusters=clusters)


# ---------------------------------------------------------------------------
# DBSCAN


def _neighbor_lists(pts: np.ndarray, radius: float) -> list[np.ndarray]:
    """Index-ascending neighbors within `radius` (inclusive, self included)."""
    m = len(pts)
    r2 = float(radius) ** 2
    lists: list[np.ndarray] = []
    chunk = max(1, 4_000_000 // max(m, 1))
    for s in range(0, m, chunk):
        e = min(s + chunk, m)
        d2 = ((pts[s:e, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        for row in d2 <= r2:
            lists.append(np.nonzero(row)[0])
    return lists


def dbscan(points, eps: float, min_pts: int) -> ClusterResult:
    """Density clustering; border points join the first cluster to reach them."""
    pts = _as_points(points)
    m = len(pts)
    labels = np.full(m, NOISE, dtype=np.int64)
    if m == 0:
        return ClusterResult(labels, [])
    neighbors = _neighbor_lists(pts, eps)
    core = np.array([len(nb) >= min_pts for nb in neighbors])

    cid = -1
    for seed in range(m):
        if not core[seed] or labels[seed] != NOISE:
            continue
        cid += 1
        labels[seed] = cid
        queue = [seed]
        while queue:
            p = queue.pop(0)
            for q in neighbors[p]:
                if labels[q] == NOISE:
                    labels[q] = cid
                    if core[q]:
                        queue.append(int(q))
    return _result_from_labels(pts, labels)


# ---------------------------------------------------------------------------
# OPTICS


@dataclass
class OpticsResult:
    ordering: np.ndarray  # int64, all points in processing order
    reachability: np.ndarray  # float64, inf where undefined
    core_distance: np.ndarray  # float64, inf where not core within eps_max


def optics(points, min_pts: int, eps_max: float) -> OpticsResult:
    """Density ordering with reachability and core distances.

    The seed queue pops the smallest (reachability, index) pair, so the
    ordering is deterministic.
    """
    pts = _as_points(points)
    m = len(pts)
    neighbors = _neighbor_lists(pts, eps_max)
    core_dist = np.full(m, np.inf)
    dists: list[np.ndarray] = []
    for i in range(m):
        d = np.sqrt(((pts[neighbors[i]] - pts[i]) ** 2).sum(axis=1))
        dists.append(d)
        if len(d) >= min_pts:
            core_dist[i] = np.partition(d, min_pts - 1)[min_pts - 1]

    reach = np.full(m, np.inf)
    processed = np.zeros(m, dtype=bool)
    ordering: list[int] = []

    def expand(p: int, heap: list):
        for q, d in zip(neighbors[p], dists[p]):
            if processed[q] or q == p:
                continue
            new_reach = max(core_dist[p], d)
            if new_reach < reach[q]:
                reach[q] = new_reach
                heapq.heappush(heap, (new_reach, int(q)))

    for start in range(m):
        if processed[start]:
            continue
        processed[start] = True
        ordering.append(start)
        if np.isfinite(core_dist[start]):
            heap: list = []
            expand(start, heap)
            while heap:
                r, p = heapq.heappop(heap)
                if processed[p] or r != reach[p]:
                    continue  # stale entry
                processed[p] = True
                ordering.append(p)
                if np.isfinite(core_dist[p]):
                    expand(p, heap)

    return OpticsResult(ordering=np.array(ordering, dtype=np.int64),
                        reachability=reach, core_distance=core_dist)


def extract_dbscan(points, result: OpticsResult, eps: float) -> ClusterResult:
    """DBSCAN-style clustering read off the OPTICS ordering at `eps`.

    Matches dbscan(points, eps, min_pts) on core points; border points
    may land differently.
    """
    pts = _as_points(points)
    labels = np.full(len(pts), NOISE, dtype=np.int64)
    cid = -1
    for p in result.ordering:
        if result.reachability[p] > eps:
            if result.core_distance[p] <= eps:
                cid += 1
                labels[p] = cid
        else:
            labels[p] = cid
    return _result_from_labels(pts, labels)


# ---------------------------------------------------------------------------
# detection refinement


def _cluster(pts: np.ndarray, params: ClusterParams) -> ClusterResult:
    if params.algorithm == "agglomerative":
        return agglomerative_ward(pts, params.linkage_threshold)
    if params.algorithm == "dbscan":
        return dbscan(pts, params.eps, params.min_pts)
    ordering = optics(pts, params.min_pts, params.optics_eps_max)
    return extract_dbscan(pts, ordering, params.optics_eps)


def refine(cloud: PointCloud, predicted: np.ndarray,
           params: ClusterParams = ClusterParams()) -> list[Detection]:
    """Cluster each class's points and keep clusters big enough to trust.

    Noise points and clusters below min_cluster_size are dropped; one
    detection per surviving cluster, sorted by descending support (then
    center, for stability).
    """
    detections: list[Detection] = []
    for cls in (PORT, STARBOARD):
        mask = predicted == cls
        if not mask.any():
            continue
        pts = np.stack([cloud.y[mask], cloud.z[mask]], axis=1)
        result = _cluster(pts, params)
        for size, center in result.clusters:
            if size >= params.min_cluster_size:
                detections.append(Detection(cls, center, size))
    detections.sort(key=lambda d: (-d.support, d.center[0], d.center[1],
                                   d.vortex_class))
    return detections
