"""Perturbation-based explanations: edit a vortex core, re-segment, compare.

Three grid-level edits probe what the model actually keys on:

  * mask: cells within the core disk take the scan-wide mean velocity;
  * move: the core disk's values relocate (nearest-cell) by a fixed
    offset, the vacated cells take the scan mean;
  * swap: two disjoint disks exchange values cell-by-cell at matching
    offsets.

Edits happen before sampling, and the pipeline reuses the scan's stored
sampling seed, so the original and perturbed runs see the exact same
cells and any prediction change is the model's response, not sampling
noise. The replacement mean is always the pre-perturbation mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import ClusterParams, Detection, refine
from .dataio import Checkpoint, PointCloud
from .evaluate import DEFAULT_MATCH_RADIUS, canonical_detections, match
from .geometry import ScanGeometry
from .models import predict
from .synth import PORT, STARBOARD, LidarScan, VortexSpec
from .training import preprocess_scan

METHODS = ("mask", "move", "swap")

DEFAULT_CORE_RADIUS = 25.0
SUPPRESSION_DROP = 0.8  # relative in-disk fraction drop that counts as suppressed
RING_RETENTION = 0.5  # relative ring fraction that counts as retained


@dataclass(frozen=True)
class PerturbationSpec:
    method: str
    target_center: tuple[float, float]
    radius: float = DEFAULT_CORE_RADIUS
    move_destination: tuple[float, float] | None = None
    second_center: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown perturbation method {self.method!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.method == "move" and self.move_destination is None:
            raise ValueError("move needs a destination")
        if self.method == "swap":
            if self.second_center is None:
                raise ValueError("swap needs a second center")
            gap = np.hypot(self.second_center[0] - self.target_center[0],
                           self.second_center[1] - self.target_center[1])
            if gap <= 2 * self.radius:
                raise ValueError("swap regions must be disjoint")


# ---------------------------------------------------------------------------
# grid helpers


def scan_mean(scan: LidarScan) -> float:
    return float(scan.vr.astype(np.float64).mean())


def disk_cells(geom: ScanGeometry, center: tuple[float, float],
               radius: float, inner: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """(beam, gate) indices whose centers fall in the (annular) disk, beam-major."""
    yy, zz = geom.cell_positions()
    d2 = (yy - center[0]) ** 2 + (zz - center[1]) ** 2
    mask = (d2 <= radius * radius) & (d2 > inner * inner)
    return np.nonzero(mask)  # row-major == beam-major


def nearest_cell(geom: ScanGeometry, y: float, z: float) -> tuple[int, int]:
    """Grid cell closest to (y, z); ties go to the lower beam, then gate."""
    yy, zz = geom.cell_positions()
    d2 = (yy - y) ** 2 + (zz - z) ** 2
    flat = int(np.argmin(d2))  # first occurrence = lowest beam, then gate
    return flat // geom.n_gates, flat % geom.n_gates


# ---------------------------------------------------------------------------
# perturbations


def mask_core(scan: LidarScan, center: tuple[float, float], radius: float,
              fill: float | None = None) -> LidarScan:
    """Replace the disk's velocities with the scan mean (or a given fill)."""
    beams, gates = disk_cells(scan.geom, center, radius)
    if len(beams) == 0:
        raise ValueError(f"disk at {center} with radius {radius} misses the grid")
    if fill is None:
        fill = scan_mean(scan)
    vr = scan.vr.copy()
    vr[beams, gates] = np.float32(fill)
    return replace(scan, vr=vr)


def move_core(scan: LidarScan, center: tuple[float, float], radius: float,
              destination: tuple[float, float]) -> LidarScan:
    """Relocate the disk by destination-center, backfilling with the mean.

    Every source cell writes its original value into the grid cell
    nearest its shifted position (later writes win, in beam-major source
    order); source cells nothing wrote over take the original scan mean.
    """
    geom = scan.geom
    src_beams, src_gates = disk_cells(geom, center, radius)
    if len(src_beams) == 0:
        raise ValueError(f"disk at {center} with radius {radius} misses the grid")
    dst_beams, dst_gates = disk_cells(geom, destination, radius)
    if len(dst_beams) == 0:
        raise ValueError(f"destination disk at {destination} is off the grid")
    mean = scan_mean(scan)
    dy = destination[0] - center[0]
    dz = destination[1] - center[1]

    yy, zz = geom.cell_positions()
    vr = scan.vr.copy()
    written = np.zeros(vr.shape, dtype=bool)
    for b, g in zip(src_beams, src_gates):
        tb, tg = nearest_cell(geom, yy[b, g] + dy, zz[b, g] + dz)
        vr[tb, tg] = scan.vr[b, g]
        written[tb, tg] = True
    backfill = ~written[src_beams, src_gates]
    vr[src_beams[backfill], src_gates[backfill]] = np.float32(mean)
    return replace(scan, vr=vr)


def swap_cores(scan: LidarScan, center_a: tuple[float, float],
               center_b: tuple[float, float], radius: float) -> LidarScan:
    """Exchange two disjoint disks cell-by-cell at matching offsets."""
    gap = np.hypot(center_b[0] - center_a[0], center_b[1] - center_a[1])
    if gap <= 2 * radius:
        raise ValueError("swap disks overlap")
    geom = scan.geom
    yy, zz = geom.cell_positions()
    vr = scan.vr.copy()
    swapped = np.zeros(vr.shape, dtype=bool)

    def exchange(beams, gates, src_center, dst_center):
        for b, g in zip(beams, gates):
            oy = yy[b, g] - src_center[0]
            oz = zz[b, g] - src_center[1]
            pb, pg = nearest_cell(geom, dst_center[0] + oy, dst_center[1] + oz)
            if swapped[b, g] or swapped[pb, pg]:
                continue
            vr[b, g], vr[pb, pg] = vr[pb, pg], vr[b, g]
            swapped[b, g] = True
            swapped[pb, pg] = True

    beams_a, gates_a = disk_cells(geom, center_a, radius)
    beams_b, gates_b = disk_cells(geom, center_b, radius)
    if len(beams_a) == 0 or len(beams_b) == 0:
        raise ValueError("swap disk misses the grid")
    exchange(beams_a, gates_a, center_a, center_b)
    exchange(beams_b, gates_b, center_b, center_a)
    return replace(scan, vr=vr)


def apply_perturbation(scan: LidarScan, spec: PerturbationSpec) -> LidarScan:
    if spec.method == "mask":
        return mask_core(scan, spec.target_center, spec.radius)
    if spec.method == "move":
        return move_core(scan, spec.target_center, spec.radius, spec.move_destination)
    return swap_cores(scan, spec.target_center, spec.second_center, spec.radius)


# ---------------------------------------------------------------------------
# the explanation pipeline


@dataclass
class RegionStats:
    name: str
    center: tuple[float, float]
    inner_radius: float
    outer_radius: float
    n_points: int
    frac_before: np.ndarray  # per class, length n_classes
    frac_after: np.ndarray


@dataclass
class DetectionDeltas:
    appeared: list[Detection]
    vanished: list[Detection]
    moved: list[tuple[Detection, Detection, float]]


@dataclass
class ExplainReport:
    method: str
    target_class: int
    regions: list[RegionStats]
    verdicts: dict[str, bool]
    detections_before: list[Detection]
    detections_after: list[Detection]
    deltas: DetectionDeltas = field(default_factory=lambda: DetectionDeltas([], [], []))


def _region_fractions(cloud: PointCloud, labels: np.ndarray, center, inner, outer,
                      n_classes: int = 3) -> tuple[int, np.ndarray]:
    d2 = (cloud.y - center[0]) ** 2 + (cloud.z - center[1]) ** 2
    mask = (d2 <= outer * outer) & (d2 > inner * inner)
    n = int(mask.sum())
    frac = np.zeros(n_classes)
    if n:
        frac = np.bincount(labels[mask], minlength=n_classes)[:n_classes] / n
    return n, frac


def _majority_vortex_class(frac: np.ndarray) -> int:
    if frac[PORT] == 0.0 and frac[STARBOARD] == 0.0:
        return 0
    return PORT if frac[PORT] >= frac[STARBOARD] else STARBOARD


def explain(checkpoint: Checkpoint, scan: LidarScan, spec: PerturbationSpec,
            n_points: int = 12_000,
            cluster_params: ClusterParams = ClusterParams(),
            d_match: float = DEFAULT_MATCH_RADIUS,
            dynamic_graph: bool = True,
            polar_inputs: bool = False,
            suppression_drop: float = SUPPRESSION_DROP,
            ring_retention: float = RING_RETENTION) -> ExplainReport:
    """Run the pipeline on the scan and its perturbed twin and compare."""

    def run(s: LidarScan):
        cloud = preprocess_scan(s, n_points, with_labels=False)
        labels = predict(checkpoint, cloud, dynamic_graph=dynamic_graph,
                         polar_inputs=polar_inputs)
        return cloud, labels, refine(cloud, labels, cluster_params)

    cloud0, labels0, dets0 = run(scan)
    perturbed = apply_perturbation(scan, spec)
    cloud1, labels1, dets1 = run(perturbed)

    r = spec.radius
    region_specs = [("core", spec.target_center, 0.0, r)]
    if spec.method == "mask":
        region_specs.append(("ring", spec.target_center, r, 2 * r))
    elif spec.method == "move":
        region_specs.append(("destination", spec.move_destination, 0.0, r))
    else:
        region_specs.append(("second", spec.second_center, 0.0, r))

    regions = []
    for name, center, inner, outer in region_specs:
        n, before = _region_fractions(cloud0, labels0, center, inner, outer)
        _, after = _region_fractions(cloud1, labels1, center, inner, outer)
        regions.append(RegionStats(name=name, center=center, inner_radius=inner,
                                   outer_radius=outer, n_points=n,
                                   frac_before=before, frac_after=after))

    core = regions[0]
    target = _majority_vortex_class(core.frac_before)
    verdicts: dict[str, bool] = {}

    def suppressed(region: RegionStats) -> bool:
        if target == 0 or region.frac_before[target] == 0.0:
            return False
        return region.frac_after[target] <= (1.0 - suppression_drop) * region.frac_before[target]

    if spec.method == "mask":
        ring = regions[1]
        verdicts["masked_core_suppressed"] = suppressed(core)
        verdicts["surrounding_ring_retained"] = (
            target != 0
            and ring.frac_before[target] > 0.0
            and ring.frac_after[target] >= ring_retention * ring.frac_before[target]
        )
    elif spec.method == "move":
        verdicts["masked_core_suppressed"] = suppressed(core)
        dest = spec.move_destination
        verdicts["relocated_core_detected"] = target != 0 and any(
            d.vortex_class == target
            and np.hypot(d.center[0] - dest[0], d.center[1] - dest[1]) <= d_match
            for d in dets1
        )
    else:
        second = regions[1]
        # what each disk received is the other disk's dominant prediction
        incoming_core = _majority_vortex_class(second.frac_before)
        incoming_second = _majority_vortex_class(core.frac_before)
        ok_core = core.n_points > 0 and (
            core.frac_after[incoming_core] > 0.0 if incoming_core else True
        )
        ok_second = second.n_points > 0 and (
            second.frac_after[incoming_second] > 0.0 if incoming_second else True
        )
        verdicts["swap_classes_intermingled"] = bool(ok_core and ok_second)

    # detection bookkeeping: treat the pre-perturbation detections as "truth"
    # for a class-gated nearest match between the two runs
    pseudo = match(tuple_from_detections(dets0), dets1, d_match)
    dets1_sorted = canonical_detections(dets1)
    moved = [(dets0[ti], dets1_sorted[di], dist) for ti, di, dist in pseudo.pairs]
    vanished = [dets0[ti] for ti in pseudo.fn_truths]
    appeared = [dets1_sorted[di] for di in pseudo.fp_detections]

    return ExplainReport(method=spec.method, target_class=target, regions=regions,
                         verdicts=verdicts, detections_before=dets0,
                         detections_after=dets1,
                         deltas=DetectionDeltas(appeared, vanished, moved))


def tuple_from_detections(dets: list[Detection]):
    """Adapt detections into truth-shaped records for the matcher."""
    return tuple(
        VortexSpec(d.vortex_class, d.center[0], d.center[1], 1.0, 1.0) for d in dets
    )


def format_explain_report(report: ExplainReport) -> str:
    lines = [f"method\t{report.method}", f"target_class\t{report.target_class}"]
    for name, value in report.verdicts.items():
        lines.append(f"verdict\t{name}\t{str(value).lower()}")
    for region in report.regions:
        before = " ".join(f"{v:.4f}" for v in region.frac_before)
        after = " ".join(f"{v:.4f}" for v in region.frac_after)
        lines.append(
            f"region\t{region.name}\tcenter=({region.center[0]:.1f},{region.center[1]:.1f})"
            f"\tr=({region.inner_radius:.1f},{region.outer_radius:.1f})"
            f"\tpoints={region.n_points}\tbefore=[{before}]\tafter=[{after}]"
        )
    lines.append(f"detections_before\t{len(report.detections_before)}")
    lines.append(f"detections_after\t{len(report.detections_after)}")
    for a, b, dist in report.deltas.moved:
        lines.append(
            f"moved\t{a.vortex_class}\t({a.center[0]:.1f},{a.center[1]:.1f})"
            f"->({b.center[0]:.1f},{b.center[1]:.1f})\t{dist:.2f}"
        )
    for d in report.deltas.vanished:
        lines.append(f"vanished\t{d.vortex_class}\t({d.center[0]:.1f},{d.center[1]:.1f})")
    for d in report.deltas.appeared:
        lines.append(f"appeared\t{d.vortex_class}\t({d.center[0]:.1f},{d.center[1]:.1f})")
    return "\n".join(lines) + "\n"
