"""Command-line pipeline: generate / train / eval / explain / render.

All commands are deterministic given their flags; diagnostics go to
stderr, results to stdout and the requested output files. The
VORTEXSEG_THREADS environment variable caps per-scan worker parallelism
for generate and eval (0 or unset = auto).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import cluster as cluster_mod
from . import dataio, evaluate, explain as explain_mod, models, render, synth, training
from .rng import scan_seeds

_CLUSTER_CHOICES = {"agglo": "agglomerative", "dbscan": "dbscan", "optics": "optics"}

_TRAIN_DEFAULTS = {"dgcnn": (50, 4), "pointnet": (100, 16)}  # epochs, batch


def _n_workers() -> int:
    raw = os.environ.get("VORTEXSEG_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"VORTEXSEG_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise SystemExit("VORTEXSEG_THREADS must be >= 0")
    return n if n > 0 else min(8, os.cpu_count() or 1)


def _parse_point(text: str) -> tuple[float, float]:
    try:
        y, z = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected Y,Z, got {text!r}")
    return y, z


def _add_geometry_flags(p: argparse.ArgumentParser) -> None:
    g = synth.DEFAULT_GEOMETRY
    p.add_argument("--beams", type=int, default=g.n_beams)
    p.add_argument("--gates", type=int, default=g.n_gates)
    p.add_argument("--elev-min", type=float, default=g.elevation_min)
    p.add_argument("--elev-max", type=float, default=g.elevation_max)
    p.add_argument("--range-min", type=float, default=g.range_min)
    p.add_argument("--range-max", type=float, default=g.range_max)


def _add_cluster_flags(p: argparse.ArgumentParser) -> None:
    d = cluster_mod.ClusterParams()
    p.add_argument("--cluster", choices=sorted(_CLUSTER_CHOICES), default="agglo")
    p.add_argument("--linkage-threshold", type=float, default=d.linkage_threshold)
    p.add_argument("--eps", type=float, default=d.eps)
    p.add_argument("--min-pts", type=int, default=d.min_pts)
    p.add_argument("--optics-eps-max", type=float, default=d.optics_eps_max)
    p.add_argument("--optics-eps", type=float, default=d.optics_eps)
    p.add_argument("--min-cluster-size", type=int, default=d.min_cluster_size)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--points", type=int, default=dataio.DEFAULT_N_POINTS)
    p.add_argument("--static-graph", action="store_true",
                   help="build kNN graphs from spatial coordinates only")
    p.add_argument("--polar-inputs", action="store_true",
                   help="feed (phi, range) instead of (y, z) to the model")


def _cluster_params(args) -> cluster_mod.ClusterParams:
    return cluster_mod.ClusterParams(
        algorithm=_CLUSTER_CHOICES[args.cluster],
        linkage_threshold=args.linkage_threshold,
        eps=args.eps,
        min_pts=args.min_pts,
        optics_eps_max=args.optics_eps_max,
        optics_eps=args.optics_eps,
        min_cluster_size=args.min_cluster_size,
    )


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    geom = synth.ScanGeometry(args.beams, args.gates, args.elev_min, args.elev_max,
                              args.range_min, args.range_max)
    counts = tuple(range(args.min_vortices, args.max_vortices + 1))
    config = synth.SceneConfig(geom=geom, vortex_counts=counts,
                               noise_sigma=args.noise_sigma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = scan_seeds(args.seed, args.count)
    names = [f"scan_{i:05d}.wvls" for i in range(args.count)]

    def make(i: int) -> None:
        scene = synth.random_scene(int(seeds[i]), config)
        dataio.write_scan(synth.synth_scan(geom, scene), out / names[i])

    with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
        list(pool.map(make, range(args.count)))
    dataio.write_manifest(out, names)  # manifest last: readers see a full set
    print(f"wrote {args.count} scans to {out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    epochs, batch = _TRAIN_DEFAULTS[args.model]
    if args.epochs is not None:
        epochs = args.epochs
    if args.batch is not None:
        batch = args.batch
    config = models.ModelConfig(arch=args.model, k=args.k,
                                dynamic_graph=not args.static_graph,
                                polar_inputs=args.polar_inputs)
    result = training.train(args.data, config, epochs=epochs, batch_size=batch,
                            lr=args.lr, seed=args.seed, n_points=args.points,
                            r_label=args.r_label)
    dataio.write_checkpoint(result.checkpoint, args.out)
    log_path = args.loss_log or (args.out + ".log")
    training.write_loss_log(log_path, result.meta, result.loss_log)
    if result.loss_log:
        print(f"final loss {result.loss_log[-1][1]:.6f} after {epochs} epochs",
              file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# eval


def _pipeline_detections(scan, checkpoint, args, params):
    cloud = training.preprocess_scan(scan, args.points, args.r_label)
    if args.oracle:
        labels = cloud.labels
    else:
        labels = models.predict(checkpoint, cloud,
                                dynamic_graph=not args.static_graph,
                                polar_inputs=args.polar_inputs)
    return cloud, labels, cluster_mod.refine(cloud, labels, params)


def cmd_eval(args) -> int:
    if not args.oracle and not args.ckpt:
        raise SystemExit("--ckpt is required unless --oracle is given")
    checkpoint = dataio.read_checkpoint(args.ckpt) if args.ckpt else None
    paths = dataio.read_manifest(args.data)
    if not paths:
        raise SystemExit(f"dataset {args.data} is empty")
    params = _cluster_params(args)

    def run(path):
        scan = dataio.read_scan(path)
        _, _, dets = _pipeline_detections(scan, checkpoint, args, params)
        return (Path(path).stem, scan.truth, dets)

    with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
        per_scan = list(pool.map(run, paths))
    report = evaluate.evaluate_scans(per_scan, d_match=args.d_match)

    source = "oracle labels" if args.oracle else Path(args.ckpt).name
    text = evaluate.format_report(report, title=f"{source} + {args.cluster}")
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        evaluate.write_truth_records(report, out / "records.tsv")
    return 0


# ---------------------------------------------------------------------------
# explain


def cmd_explain(args) -> int:
    scan = dataio.read_scan(args.scan)
    checkpoint = dataio.read_checkpoint(args.ckpt)
    params = _cluster_params(args)

    center = args.center
    if args.auto:
        _, _, dets = _pipeline_detections(scan, checkpoint, args, params)
        if not dets:
            raise SystemExit("no detections to auto-select on this scan")
        center = dets[0].center  # strongest support
    if center is None:
        raise SystemExit("--center Y,Z is required without --auto")
    if args.method in ("move", "swap") and args.dest is None:
        raise SystemExit(f"--dest Y,Z is required for --method {args.method}")

    spec = explain_mod.PerturbationSpec(
        method=args.method,
        target_center=tuple(center),
        radius=args.radius,
        move_destination=args.dest if args.method == "move" else None,
        second_center=args.dest if args.method == "swap" else None,
    )
    report = explain_mod.explain(
        checkpoint, scan, spec, n_points=args.points, cluster_params=params,
        d_match=args.d_match, dynamic_graph=not args.static_graph,
        polar_inputs=args.polar_inputs,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = explain_mod.format_explain_report(report)
    with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    sys.stdout.write(text)

    perturbed = explain_mod.apply_perturbation(scan, spec)
    for name, s in (("before", scan), ("after", perturbed)):
        cloud = training.preprocess_scan(s, args.points, with_labels=False)
        labels = models.predict(checkpoint, cloud,
                                dynamic_graph=not args.static_graph,
                                polar_inputs=args.polar_inputs)
        dets = cluster_mod.refine(cloud, labels, params)
        render.render_scan(s, str(out / name), cloud, labels, dets)
    return 0


# ---------------------------------------------------------------------------
# render


def cmd_render(args) -> int:
    scan = dataio.read_scan(args.scan)
    cloud = labels = dets = None
    if args.ckpt or args.oracle:
        checkpoint = dataio.read_checkpoint(args.ckpt) if args.ckpt else None
        params = _cluster_params(args)
        cloud, labels, dets = _pipeline_detections(scan, checkpoint, args, params)
    paths = render.render_scan(scan, args.out, cloud, labels, dets)
    print("\n".join(str(p) for p in paths), file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexseg",
        description="Wake-vortex detection in synthetic Doppler-LiDAR scans",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a labeled scan dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.3)
    p.add_argument("--min-vortices", type=int, default=1)
    p.add_argument("--max-vortices", type=int, default=3)
    _add_geometry_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a segmentation model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=sorted(_TRAIN_DEFAULTS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=None,
                   help="default: 50 for dgcnn, 100 for pointnet")
    p.add_argument("--batch", type=int, default=None,
                   help="default: 4 for dgcnn, 16 for pointnet")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--r-label", type=float, default=dataio.DEFAULT_LABEL_RADIUS)
    p.add_argument("--loss-log", default=None)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run the detection pipeline over a test set")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--d-match", type=float, default=evaluate.DEFAULT_MATCH_RADIUS)
    p.add_argument("--r-label", type=float, default=dataio.DEFAULT_LABEL_RADIUS)
    p.add_argument("--oracle", action="store_true",
                   help="use truth-derived labels instead of a model")
    p.add_argument("--out", default=None)
    _add_model_flags(p)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="perturb a vortex core and compare predictions")
    p.add_argument("--scan", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--method", choices=sorted(explain_mod.METHODS), required=True)
    p.add_argument("--center", type=_parse_point, default=None)
    p.add_argument("--dest", type=_parse_point, default=None,
                   help="move destination / swap second center")
    p.add_argument("--radius", type=float, default=explain_mod.DEFAULT_CORE_RADIUS)
    p.add_argument("--auto", action="store_true",
                   help="target the strongest detection")
    p.add_argument("--d-match", type=float, default=evaluate.DEFAULT_MATCH_RADIUS)
    p.add_argument("--r-label", type=float, default=dataio.DEFAULT_LABEL_RADIUS)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    _add_model_flags(p)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("render", help="render a scan (and optionally its segmentation)")
    p.add_argument("--scan", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--d-match", type=float, default=evaluate.DEFAULT_MATCH_RADIUS)
    p.add_argument("--r-label", type=float, default=dataio.DEFAULT_LABEL_RADIUS)
    p.add_argument("--oracle", action="store_true",
                   help="segment from truth labels instead of a model")
    _add_model_flags(p)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, dataio.FormatError, training.TrainingDiverged) as exc:
        print(f"vortexseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
