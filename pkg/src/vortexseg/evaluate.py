"""Detection-truth matching and the recall / mean-error metrics.

A detection counts for a truth vortex only when classes agree and the
center distance stays within d_match (default 50 m, twice the label
radius). Matching is greedy over ascending distance with index-based
tie-breaks on a canonically sorted detection list, so input order never
changes the outcome.

Mean error follows the origin-distance convention for misses: a false
negative contributes the distance from (0, 0) to its truth center. The
no-FN variant averages matched distances only. False positives touch
neither error metric; they are tracked per scan for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import Detection
from .synth import CLASS_NAMES, VortexSpec

DEFAULT_MATCH_RADIUS = 50.0

STATUS_MATCHED = "matched"
STATUS_FN = "fn"


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]  # (truth idx, detection idx, distance)
    fn_truths: list[int]
    fp_detections: list[int]


@dataclass
class TruthRecord:
    scan_id: str
    vortex_class: int
    truth_y: float
    truth_z: float
    status: str  # matched | fn
    error_m: float


@dataclass
class ScanRecord:
    scan_id: str
    n_truth: int
    n_detected: int
    true_positives: int
    false_negatives: int
    false_positives: int


@dataclass
class EvalReport:
    n_truth: int = 0
    n_detected: int = 0
    true_positives: int = 0
    false_negatives: int = 0
    false_positives: int = 0
    recall: float = 0.0
    mean_error: float = 0.0
    mean_error_no_fn: float = float("nan")
    truth_records: list[TruthRecord] = field(default_factory=list)
    scan_records: list[ScanRecord] = field(default_factory=list)


def canonical_detections(detections: list[Detection]) -> list[Detection]:
    return sorted(detections, key=lambda d: (-d.support, d.center[0],
                                             d.center[1], d.vortex_class))


def match(truth: tuple[VortexSpec, ...], detections: list[Detection],
          d_match: float = DEFAULT_MATCH_RADIUS) -> MatchResult:
    """Greedy one-to-one class-gated matching in ascending distance order."""
    dets = canonical_detections(detections)
    candidates = []
    for ti, t in enumerate(truth):
        for di, d in enumerate(dets):
            if d.vortex_class != t.vortex_class:
                continue
            dist = float(np.hypot(d.center[0] - t.y, d.center[1] - t.z))
            if dist <= d_match:
                candidates.append((dist, ti, di))
    candidates.sort()
    used_t: set[int] = set()
    used_d: set[int] = set()
    pairs = []
    for dist, ti, di in candidates:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        pairs.append((ti, di, dist))
    fn = [ti for ti in range(len(truth)) if ti not in used_t]
    fp = [di for di in range(len(dets)) if di not in used_d]
    return MatchResult(pairs=pairs, fn_truths=fn, fp_detections=fp)


def evaluate_scans(per_scan: list[tuple[str, tuple[VortexSpec, ...], list[Detection]]],
                   d_match: float = DEFAULT_MATCH_RADIUS) -> EvalReport:
    """Aggregate matching over (scan_id, truth, detections) triples."""
    report = EvalReport()
    errors_all: list[float] = []
    errors_matched: list[float] = []
    for scan_id, truth, detections in per_scan:
        result = match(truth, detections, d_match)
        by_truth = {ti: dist for ti, _, dist in result.pairs}
        for ti, t in enumerate(truth):
            if ti in by_truth:
                err = by_truth[ti]
                status = STATUS_MATCHED
                errors_matched.append(err)
            else:
                err = float(np.hypot(t.y, t.z))  # miss: distance from origin
                status = STATUS_FN
            errors_all.append(err)
            report.truth_records.append(TruthRecord(
                scan_id=scan_id, vortex_class=t.vortex_class,
                truth_y=t.y, truth_z=t.z, status=status, error_m=err))
        report.scan_records.append(ScanRecord(
            scan_id=scan_id, n_truth=len(truth), n_detected=len(detections),
            true_positives=len(result.pairs),
            false_negatives=len(result.fn_truths),
            false_positives=len(result.fp_detections)))
        report.n_truth += len(truth)
        report.n_detected += len(detections)
        report.true_positives += len(result.pairs)
        report.false_negatives += len(result.fn_truths)
        report.false_positives += len(result.fp_detections)

    if report.n_truth == 0:
        raise ValueError("evaluation set contains no truth vortices; recall undefined")
    report.recall = report.true_positives / report.n_truth
    report.mean_error = float(np.mean(errors_all))
    if errors_matched:
        report.mean_error_no_fn = float(np.mean(errors_matched))
    return report


def format_report(report: EvalReport, title: str = "evaluation") -> str:
    """Human-readable summary table (recall in percent, errors in meters)."""
    lines = [
        f"{title}",
        f"  scans: {len(report.scan_records)}   truth vortices: {report.n_truth}   "
        f"detections: {report.n_detected}",
        f"  TP: {report.true_positives}   FN: {report.false_negatives}   "
        f"FP: {report.false_positives}",
        "",
        "  Recall (%)   ME (m)   ME w/o fn (m)",
        f"  {100.0 * report.recall:10.2f}   {report.mean_error:6.2f}   "
        f"{report.mean_error_no_fn:13.2f}",
    ]
    return "\n".join(lines) + "\n"


def write_truth_records(report: EvalReport, path) -> None:
    """Machine-readable per-truth lines: scan, class, center, status, error."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in report.truth_records:
            f.write(
                f"{r.scan_id}\t{CLASS_NAMES[r.vortex_class]}\t"
                f"{r.truth_y:.6f}\t{r.truth_z:.6f}\t{r.status}\t{r.error_m:.6f}\n"
            )
