"""Command-line interface.

Subcommands: unproject, align, chamfer, eval, gen, optimize, bench.
Outputs are machine-parsable key/value text (12 significant digits) or CSV.
Exit codes: 0 ok, 2 I/O or parse failure, 3 shape/precondition violation,
4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import synthetic
from .alignment import icp, umeyama
from .camera import aggregate_views, unproject
from .errors import DegeneracyError, FormatError, PointregError, PreconditionError
from .geometry import PointCloud, SimilarityTransform, apply_transform, rotation_about_axis
from .io_formats import (
    read_camera,
    read_ply,
    read_pfm,
    write_camera,
    write_pfm,
    write_ply,
)
from .loss import LossWeights, chamfer_sd, one_to_one_loss, pm_loss
from .metrics import evaluate
from .spatial import SpatialIndex
from .synthetic import MisalignBounds, SceneBundle, SceneSpec

EXIT_OK = 0
EXIT_IO = 2
EXIT_PRECONDITION = 3
EXIT_DEGENERATE = 4


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _workers(threads: int) -> int:
    # 0 means auto (all cores); results are identical for any value.
    return -1 if threads == 0 else threads


def _print_kv(pairs) -> None:
    for key, value in pairs:
        if isinstance(value, float):
            value = _fmt(value)
        elif isinstance(value, np.ndarray):
            value = " ".join(_fmt(v) for v in value.ravel())
        print(f"{key} {value}")


def cmd_unproject(args) -> int:
    depth = read_pfm(args.depth)
    cam = read_camera(args.camera)
    cloud = unproject(depth, cam)
    write_ply(PointCloud(cloud.valid_points()), args.out)
    print(f"valid_points {cloud.n_valid}")
    return EXIT_OK


def _transform_lines(result, elapsed_ms=None):
    t = result.transform
    pairs = [
        ("scale", t.scale),
        ("rotation", t.rotation),
        ("translation", t.translation),
        ("rms_residual", result.rms_residual),
        ("iterations", result.iterations),
        ("used_count", result.used_count),
    ]
    if elapsed_ms is not None:
        pairs.append(("elapsed_ms", elapsed_ms))
    return pairs


def cmd_align(args) -> int:
    source = read_ply(args.source)
    target = read_ply(args.target)
    start = time.perf_counter()
    if args.method == "umeyama":
        result = umeyama(source, target)
    else:
        result = icp(source, target, workers=_workers(args.threads))
    elapsed_ms = (time.perf_counter() - start) * 1e3
    lines = _transform_lines(result)
    with open(args.out_transform, "w", encoding="ascii") as f:
        for key, value in lines:
            if isinstance(value, float):
                value = _fmt(value)
            elif isinstance(value, np.ndarray):
                value = " ".join(_fmt(v) for v in value.ravel())
            f.write(f"{key} {value}\n")
    _print_kv(lines + [("elapsed_ms", elapsed_ms)])
    return EXIT_OK


def cmd_chamfer(args) -> int:
    pred = read_ply(args.pred)
    ref = read_ply(args.ref)
    workers = _workers(args.threads)
    if args.mode == "sd":
        if args.align:
            loss, _ = pm_loss(pred, ref, workers=workers)
        else:
            loss = chamfer_sd(pred, SpatialIndex(ref), workers=workers)
    else:
        if args.align:
            result = umeyama(ref, pred)
            ref = apply_transform(result.transform, ref)
        loss = one_to_one_loss(pred, ref)
    _print_kv([("value", loss.value)])
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = read_ply(args.pred)
    gt = read_ply(args.gt)
    m = evaluate(pred, gt, workers=_workers(args.threads))
    _print_kv(sorted(m.as_dict().items()))
    return EXIT_OK


_SPEC_KEYS = {
    "seed": int,
    "width": int,
    "height": int,
    "n_views": int,
    "layout": str,
    "d_fg": float,
    "d_bg": float,
    "bleed_px": int,
    "noise_sigma_depth": float,
    "noise_sigma_pm": float,
    "pm_jitter_px": int,
    "misalign_scale_min": float,
    "misalign_scale_max": float,
    "misalign_max_rotation_deg": float,
    "misalign_max_translation_frac": float,
}


def parse_scene_spec(path) -> SceneSpec:
    """Parse a key/value scene spec file; unknown keys are an error."""
    fields: dict = {}
    misalign: dict = {}
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            key = tokens[0]
            if key not in _SPEC_KEYS:
                raise FormatError(f"unknown scene spec key {key!r}")
            if len(tokens) != 2:
                raise FormatError(f"key {key!r} needs exactly one value")
            value = _SPEC_KEYS[key](tokens[1])
            if key.startswith("misalign_"):
                misalign[key[len("misalign_"):]] = value
            else:
                fields[key] = value
    try:
        if misalign:
            fields["misalign"] = MisalignBounds(**{**MisalignBounds().__dict__, **misalign})
        return SceneSpec(**fields)
    except ValueError as exc:
        raise FormatError(f"invalid scene spec: {exc}")


def write_scene(bundle: SceneBundle, out_dir) -> None:
    """Materialize a bundle under the documented directory layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for j, cam in enumerate(bundle.cameras):
        view_dir = out / str(j)
        view_dir.mkdir(exist_ok=True)
        write_pfm(bundle.gt_depths[j], view_dir / "depth_gt.pfm")
        write_pfm(bundle.corrupted_depths[j], view_dir / "depth_corrupt.pfm")
        write_camera(cam, view_dir / "camera.txt")
    write_ply(bundle.pseudo_pointmap, out / "pointmap.ply")
    write_ply(bundle.gt_cloud, out / "gt.ply")


def load_scene(scene_dir) -> SceneBundle:
    """Reload a bundle written by `write_scene` (spec/misalign are not kept)."""
    scene = Path(scene_dir)
    view_dirs = sorted(
        (d for d in scene.iterdir() if d.is_dir() and d.name.isdigit()),
        key=lambda d: int(d.name),
    )
    if not view_dirs:
        raise FileNotFoundError(f"no view directories under {scene}")
    cameras = []
    gt_depths = []
    corrupted = []
    for d in view_dirs:
        cameras.append(read_camera(d / "camera.txt"))
        gt_depths.append(read_pfm(d / "depth_gt.pfm"))
        corrupted.append(read_pfm(d / "depth_corrupt.pfm"))
    gt_cloud = read_ply(scene / "gt.ply")
    pointmap = read_ply(scene / "pointmap.ply")
    return SceneBundle(
        cameras=tuple(cameras),
        gt_depths=tuple(gt_depths),
        corrupted_depths=tuple(corrupted),
        gt_cloud=gt_cloud,
        pseudo_pointmap=pointmap,
    )


def cmd_gen(args) -> int:
    spec = parse_scene_spec(args.spec)
    bundle = synthetic.generate(spec)
    write_scene(bundle, args.out)
    print(f"scene_dir {args.out}")
    print(f"views {len(bundle.cameras)}")
    return EXIT_OK


_LOSS_FLAG = {"pm3d": "pm_3d", "one2one": "one_to_one_2d", "none": "none"}


def cmd_optimize(args) -> int:
    bundle = load_scene(args.scene)
    weights = LossWeights(lambda_pm=args.lambda_pm, lambda_render=args.lambda_render)
    trace = synthetic.run_toy_optimization(
        bundle,
        _LOSS_FLAG[args.loss],
        steps=args.steps,
        lr=args.lr,
        weights=weights,
        workers=_workers(args.threads),
    )
    with open(args.trace, "w", encoding="ascii", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step", "loss", "gt_overall"])
        for row in trace:
            writer.writerow([row.step, repr(row.loss), repr(row.gt_overall)])
    print(f"final_gt_overall {_fmt(trace[-1].gt_overall)}")
    return EXIT_OK


def _bench_clouds(n: int) -> tuple[PointCloud, PointCloud]:
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, (n, 3))
    mis = SimilarityTransform(
        1.03, rotation_about_axis(np.array([0.3, 1.0, 0.2]), np.deg2rad(3.0)), np.array([0.02, -0.01, 0.03])
    )
    return PointCloud(pts), PointCloud(mis.apply_to_points(pts))


def cmd_bench(args) -> int:
    source, target = _bench_clouds(args.n)
    workers = _workers(args.threads)

    def median_time(fn):
        times = []
        for _ in range(args.reps):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
        return float(np.median(times)) * 1e3

    umeyama_ms = median_time(lambda: umeyama(source, target))
    icp_result = {}

    def run_icp():
        icp_result["r"] = icp(source, target, max_iters=50, workers=workers)

    icp_ms = median_time(run_icp)
    chamfer_ms = median_time(
        lambda: chamfer_sd(target, SpatialIndex(source), workers=workers)
    )
    _print_kv(
        [
            ("n", args.n),
            ("umeyama_ms", umeyama_ms),
            ("icp_ms", icp_ms),
            ("icp_iterations", icp_result["r"].iterations),
            ("chamfer_ms", chamfer_ms),
            ("icp_over_umeyama", icp_ms / umeyama_ms),
        ]
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointreg",
        description="Point-cloud geometry tools: unprojection, alignment, losses, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument("--threads", type=int, default=0,
                       help="query parallelism cap, 0 = auto (results are identical either way)")

    p = sub.add_parser("unproject", help="lift a depth map to a world-space PLY")
    p.add_argument("--depth", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_unproject)

    p = sub.add_parser("align", help="fit a similarity transform between paired clouds")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--method", choices=["umeyama", "icp"], default="umeyama")
    p.add_argument("--out-transform", required=True)
    add_threads(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("chamfer", help="geometric loss between two clouds")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--align", action="store_true",
                   help="fit ref onto pred with the closed-form alignment first")
    p.add_argument("--mode", choices=["sd", "one2one"], default="sd")
    add_threads(p)
    p.set_defaults(func=cmd_chamfer)

    p = sub.add_parser("eval", help="accuracy/completeness/overall cloud metrics")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    add_threads(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate a synthetic scene directory")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("optimize", help="toy depth optimization on a scene directory")
    p.add_argument("--scene", required=True)
    p.add_argument("--loss", choices=sorted(_LOSS_FLAG), required=True)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=100.0)
    p.add_argument("--trace", required=True)
    p.add_argument("--lambda-pm", type=float, default=LossWeights().lambda_pm)
    p.add_argument("--lambda-render", type=float, default=LossWeights().lambda_render)
    add_threads(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", help="wall-time medians for alignment and chamfer")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=3)
    add_threads(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except DegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except PointregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
