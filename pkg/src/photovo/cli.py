"""Command-line pipeline: render-synthetic, vo, reloc, make-affine, eval,
export-plot-data.

Exit codes: 0 success, 1 dataset/config errors, 2 internal errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import load_config
from .dataset import DatasetError, load_dataset, load_trajectory
from .evaluate import AlignmentError, evaluate
from .keyframes import EmptyMap, FormatVersionMismatch, IoFailure, load_map, save_map
from .pipeline import (
    export_plot_data,
    export_report,
    generate_affine_conditions,
    run_relocalization,
    run_vo,
)
from .se3 import Pose, rotation_from_quat
from .synthetic import CONDITION_PRESETS, default_scene, write_dataset
from .transform import parse_transform_spec


def _add_common_run_args(p):
    p.add_argument("--dataset", required=True, help="dataset root directory")
    p.add_argument("--condition", required=True, help="condition subdirectory name")
    p.add_argument("--transform", default="identity", help="identity | affine:a,b | affine-file:path | external:dir")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--out", default=None, help="report output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photovo", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render-synthetic", help="render a synthetic RGB-D dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=192)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument(
        "--conditions",
        default="static",
        help=f"comma list from {sorted(CONDITION_PRESETS)}",
    )

    p = sub.add_parser("vo", help="visual odometry over one condition")
    _add_common_run_args(p)
    p.add_argument("--save-map", default=None, help="write the keyframe map here")

    p = sub.add_parser("reloc", help="relocalize against an existing map")
    _add_common_run_args(p)
    p.add_argument("--map", required=True, help="keyframe map directory")
    p.add_argument(
        "--initial-pose",
        default=None,
        help="tx,ty,tz,qx,qy,qz,qw (default: ground truth's first pose)",
    )

    p = sub.add_parser("make-affine", help="derive affine illumination conditions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--source", required=True, help="source condition")
    p.add_argument(
        "--params",
        required=True,
        nargs="+",
        help="one or more name:a,b triples, e.g. light:1.5,0.1 dark:0.8,-0.2",
    )

    p = sub.add_parser("eval", help="evaluate an exported run against ground truth")
    p.add_argument("--run", required=True, help="run directory containing frames.csv")
    p.add_argument("--groundtruth", required=True, help="TUM-format trajectory file")
    p.add_argument("--out", default=None, help="write summary.csv here (default: stdout)")

    p = sub.add_parser("export-plot-data", help="error-vs-distance CSV from a run")
    p.add_argument("--run", required=True, help="run directory containing frames.csv")
    p.add_argument("--groundtruth", required=True)
    p.add_argument("--out", required=True)
    return ap


def _parse_pose(text: str) -> Pose:
    vals = [float(x) for x in text.split(",")]
    if len(vals) != 7:
        raise ValueError("pose needs 7 values: tx,ty,tz,qx,qy,qz,qw")
    return Pose(rotation_from_quat(vals[3:]), np.array(vals[:3]))


def _read_run_frames(run_dir):
    """frames.csv -> (timestamps, poses, tracked flags)."""
    path = os.path.join(run_dir, "frames.csv")
    if not os.path.isfile(path):
        raise DatasetError(f"no frames.csv under {run_dir}")
    ts, poses, tracked = [], [], []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < len(header):
                continue
            ts.append(float(parts[idx["timestamp"]]))
            t = [float(parts[idx[k]]) for k in ("tx", "ty", "tz")]
            q = [float(parts[idx[k]]) for k in ("qx", "qy", "qz", "qw")]
            poses.append(Pose(rotation_from_quat(q), np.array(t)))
            tracked.append(parts[idx["tracked"]] == "1")
    return ts, poses, tracked


def _align_gt(ts, gt_list):
    times = np.array([t for t, _ in gt_list])
    out = []
    for t in ts:
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > 0.02:
            raise AlignmentError(f"no ground truth near t={t}")
        out.append(gt_list[i][1])
    return out


def _cmd_render(args) -> int:
    names = [c.strip() for c in args.conditions.split(",") if c.strip()]
    unknown = [c for c in names if c not in CONDITION_PRESETS]
    if unknown:
        raise DatasetError(f"unknown conditions {unknown}; choose from {sorted(CONDITION_PRESETS)}")
    spec = default_scene(n_frames=args.frames, width=args.width, height=args.height, seed=args.seed)
    write_dataset(args.out, spec, {n: CONDITION_PRESETS[n] for n in names})
    print(f"wrote {args.frames} frames x {len(names)} conditions under {args.out}")
    return 0


def _cmd_vo(args) -> int:
    cfg = load_config(args.config)
    dataset = load_dataset(args.dataset)
    transform = parse_transform_spec(args.transform)
    result = run_vo(dataset, args.condition, transform, cfg)
    r = result.report
    print(
        f"vo {args.condition}: tracked {r.frames_tracked_pct:.2f}% | "
        f"trans {r.avg_trans_err_pct_dist:.3f} %dist | rot {r.avg_rot_err_deg_per_m:.4f} deg/m | "
        f"{len(result.keyframe_map)} keyframes"
    )
    if args.save_map:
        save_map(result.keyframe_map, args.save_map, dataset.intrinsics, cfg.tracker, dataset.depth_scale)
        print(f"map -> {args.save_map}")
    if args.out:
        paths = export_report(r, args.out)
        print(f"report -> {paths['summary']}")
    return 0


def _cmd_reloc(args) -> int:
    cfg = load_config(args.config)
    dataset = load_dataset(args.dataset)
    transform = parse_transform_spec(args.transform)
    kf_map, _, map_tracker_cfg = load_map(args.map, cfg.tracker)
    initial = _parse_pose(args.initial_pose) if args.initial_pose else None
    result = run_relocalization(
        dataset, args.condition, kf_map, initial, transform, cfg, tracker_cfg=map_tracker_cfg
    )
    r = result.report
    print(
        f"reloc {args.condition}: tracked {r.frames_tracked_pct:.2f}% | "
        f"trans {r.avg_trans_err_pct_dist:.3f} %dist | rot {r.avg_rot_err_deg_per_m:.4f} deg/m"
    )
    if args.out:
        paths = export_report(r, args.out)
        print(f"report -> {paths['summary']}")
    return 0


def _cmd_make_affine(args) -> int:
    dataset = load_dataset(args.dataset)
    params = []
    for spec in args.params:
        name, ab = spec.split(":")
        a, b = (float(x) for x in ab.split(","))
        params.append((name, a, b))
    created = generate_affine_conditions(dataset, args.source, params)
    for c in created:
        print(f"condition -> {c}")
    return 0


def _cmd_eval(args) -> int:
    ts, poses, tracked = _read_run_frames(args.run)
    gt = _align_gt(ts, load_trajectory(args.groundtruth))
    report = evaluate(poses, gt, tracked, ts)
    line = (
        f"tracked {report.frames_tracked_pct:.2f}% | trans {report.avg_trans_err_pct_dist:.3f} %dist | "
        f"rot {report.avg_rot_err_deg_per_m:.4f} deg/m over {report.total_distance:.3f} m"
    )
    print(line)
    if args.out:
        report.metadata = {"dataset": args.run, "condition": "-", "transform": "-", "config_hash": "-"}
        export_report(report, args.out)
    return 0


def _cmd_export_plot(args) -> int:
    ts, poses, tracked = _read_run_frames(args.run)
    gt = _align_gt(ts, load_trajectory(args.groundtruth))
    report = evaluate(poses, gt, tracked, ts)
    export_plot_data(report, args.out)
    print(f"plot data -> {args.out}")
    return 0


_COMMANDS = {
    "render-synthetic": _cmd_render,
    "vo": _cmd_vo,
    "reloc": _cmd_reloc,
    "make-affine": _cmd_make_affine,
    "eval": _cmd_eval,
    "export-plot-data": _cmd_export_plot,
}

# Anticipated user/environment failures exit 1; anything else exits 2.
_USER_ERRORS = (
    DatasetError,
    AlignmentError,
    IoFailure,
    FormatVersionMismatch,
    EmptyMap,
    FileNotFoundError,
    ValueError,
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
