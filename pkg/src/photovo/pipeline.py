"""End-to-end runs: visual odometry, relocalization, exports.

Both modes share the same per-frame machinery: apply the appearance
transform, build the luminance pyramid, track against a keyframe with a
constant-velocity initial guess, and record the resulting world pose. VO
grows the keyframe map as thresholds are crossed; relocalization reads an
existing map and never writes to it.

A frame counts as *tracked* when the tracker did not report loss AND the
estimate stayed within 5x the keyframe-creation translation threshold of
the motion prior (wild jumps are treated as failures even if the optimizer
converged somewhere).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig, config_hash
from .dataset import Dataset, DatasetError, Frame
from .evaluate import EvaluationReport, evaluate
from .image import ImageBuffer, load_image_png, save_image_png
from .keyframes import (
    KeyframeMap,
    create_keyframe,
    nearest_keyframe,
    select_tracking_keyframe,
    should_create_keyframe,
)
from .se3 import Pose, compose, inverse, quat_from_rotation
from .stereo import block_match_disparity, disparity_to_depth, stereo_depth_noise_k
from .tracker import TrackStatus, prepare_tracking_pyramid, track_frame
from .transform import AppearanceTransform, Identity

PRIOR_JUMP_FACTOR = 5.0  # x translation threshold; beyond this = not tracked


@dataclass
class RunResult:
    report: EvaluationReport
    keyframe_map: KeyframeMap
    world_poses: list
    tracked: list


def _load_transformed(dataset: Dataset, frame: Frame, transform: AppearanceTransform) -> ImageBuffer:
    return transform.apply(frame.load_rgb(), frame.frame_id)


def _frame_depth(dataset: Dataset, frame: Frame, cfg: PipelineConfig):
    """Depth for keyframe creation; stereo frames go through block matching."""
    if frame.depth_path is not None:
        return dataset.load_depth(frame)
    S = dataset.stereo_model()
    left = load_image_png(frame.rgb_path)
    right = load_image_png(frame.right_path)
    disp = block_match_disparity(left, right, S, window=cfg.stereo_window, max_disp=cfg.stereo_max_disparity)
    return disparity_to_depth(disp, S)


def _effective_tracker_cfg(dataset: Dataset, cfg: PipelineConfig):
    """Stereo datasets get a depth noise model implied by disparity noise."""
    frames = next(iter(dataset.conditions.values()))
    if frames and frames[0].right_path is not None:
        from dataclasses import replace

        k = stereo_depth_noise_k(dataset.stereo_model(), cfg.stereo_disparity_sigma)
        return replace(cfg.tracker, depth_noise_k=k)
    return cfg.tracker


def run_vo(
    dataset: Dataset,
    condition: str,
    transform: AppearanceTransform | None = None,
    cfg: PipelineConfig | None = None,
    keyframe_hook=None,
) -> RunResult:
    """Frame-to-keyframe visual odometry over one condition.

    keyframe_hook, when given, maps each freshly created keyframe to the
    one actually used (diagnostics and robustness experiments inject
    controlled corruption this way).
    """
    transform = transform or Identity()
    cfg = cfg or PipelineConfig()
    tracker_cfg = _effective_tracker_cfg(dataset, cfg)
    frames = dataset.frames(condition)
    if len(frames) < 2:
        raise DatasetError("need at least two frames for VO")
    gt = [dataset.gt_pose_at(f.timestamp) for f in frames]

    K = dataset.intrinsics
    kf_map = KeyframeMap(thresholds=cfg.keyframes)
    world = gt[0]  # trajectory anchored at ground truth's first pose
    img0 = _load_transformed(dataset, frames[0], transform)
    active = create_keyframe(0, frames[0].frame_id, img0, _frame_depth(dataset, frames[0], cfg), K, world, tracker_cfg)
    if keyframe_hook is not None:
        active = keyframe_hook(active)
    kf_map.add(active)

    worlds = [world]
    tracked = [True]
    kf_ids = [0]
    velocity = Pose.identity()  # relative camera motion between frames
    prev_world = world
    jump_limit = PRIOR_JUMP_FACTOR * cfg.keyframes.translation_threshold

    for frame in frames[1:]:
        img = _load_transformed(dataset, frame, transform)
        pyr = prepare_tracking_pyramid(img, K, tracker_cfg)
        predicted = compose(prev_world, velocity)
        init = compose(inverse(predicted), active.pose)
        result = track_frame(active, pyr, init, tracker_cfg)

        ok = result.status is not TrackStatus.LOST
        if ok:
            est_world = compose(active.pose, inverse(result.pose))
            jump = float(np.linalg.norm(est_world.translation - predicted.translation))
            ok = jump < jump_limit
        if ok:
            velocity = compose(inverse(prev_world), est_world)
            prev_world = est_world
            worlds.append(est_world)
            tracked.append(True)
            kf_ids.append(active.id)
            if should_create_keyframe(active.pose, est_world, cfg.keyframes):
                active = create_keyframe(
                    len(kf_map), frame.frame_id, img, _frame_depth(dataset, frame, cfg), K, est_world, tracker_cfg
                )
                if keyframe_hook is not None:
                    active = keyframe_hook(active)
                kf_map.add(active)
        else:
            prev_world = predicted
            worlds.append(predicted)
            tracked.append(False)
            kf_ids.append(active.id)

    report = evaluate(worlds, gt, tracked, [f.timestamp for f in frames], kf_ids)
    report.metadata = _metadata(dataset, condition, transform, cfg, mode="vo")
    return RunResult(report=report, keyframe_map=kf_map, world_poses=worlds, tracked=tracked)


def run_relocalization(
    dataset: Dataset,
    condition: str,
    kf_map: KeyframeMap,
    initial_pose: Pose | None = None,
    transform: AppearanceTransform | None = None,
    cfg: PipelineConfig | None = None,
    tracker_cfg=None,
) -> RunResult:
    """Track every frame against the nearest keyframe of an existing map."""
    transform = transform or Identity()
    cfg = cfg or PipelineConfig()
    tracker_cfg = tracker_cfg if tracker_cfg is not None else _effective_tracker_cfg(dataset, cfg)
    frames = dataset.frames(condition)
    gt = [dataset.gt_pose_at(f.timestamp) for f in frames]
    if not kf_map.keyframes:
        raise DatasetError("relocalization needs a non-empty map")
    if initial_pose is None:
        initial_pose = gt[0]

    K = dataset.intrinsics
    active = nearest_keyframe(kf_map, initial_pose)
    velocity = Pose.identity()
    prev_world = initial_pose
    predicted = initial_pose
    worlds = []
    tracked = []
    kf_ids = []
    jump_limit = PRIOR_JUMP_FACTOR * kf_map.thresholds.translation_threshold

    for i, frame in enumerate(frames):
        img = _load_transformed(dataset, frame, transform)
        pyr = prepare_tracking_pyramid(img, K, tracker_cfg)
        predicted = compose(prev_world, velocity) if i > 0 else initial_pose
        active = select_tracking_keyframe(kf_map, active, predicted)
        init = compose(inverse(predicted), active.pose)
        result = track_frame(active, pyr, init, tracker_cfg)

        ok = result.status is not TrackStatus.LOST
        if ok:
            est_world = compose(active.pose, inverse(result.pose))
            jump = float(np.linalg.norm(est_world.translation - predicted.translation))
            ok = jump < jump_limit
        if ok:
            velocity = compose(inverse(prev_world), est_world) if i > 0 else Pose.identity()
            prev_world = est_world
            worlds.append(est_world)
            tracked.append(True)
        else:
            # Re-attempt next frame from the constant-velocity prediction.
            prev_world = predicted
            worlds.append(predicted)
            tracked.append(False)
        kf_ids.append(active.id)

    report = evaluate(worlds, gt, tracked, [f.timestamp for f in frames], kf_ids)
    report.metadata = _metadata(dataset, condition, transform, cfg, mode="reloc")
    return RunResult(report=report, keyframe_map=kf_map, world_poses=worlds, tracked=tracked)


def _metadata(dataset: Dataset, condition: str, transform: AppearanceTransform, cfg: PipelineConfig, mode: str):
    return {
        "dataset": os.path.basename(os.path.normpath(dataset.root)),
        "condition": condition,
        "transform": transform.name,
        "config_hash": config_hash(cfg),
        "mode": mode,
    }


# ---------------------------------------------------------------------------
# Affine condition generation


def generate_affine_conditions(dataset: Dataset, source: str, params: list) -> list:
    """Writes sibling conditions I' = clamp(a I + b) of an existing one.

    params is a list of (name, a, b). Depth images and associations are
    copied verbatim; the applied (a, b) is recorded per frame in affine.txt.
    Returns the created condition directories.
    """
    import shutil

    frames = dataset.frames(source)
    created = []
    for name, a, b in params:
        cdir = os.path.join(dataset.root, name)
        os.makedirs(os.path.join(cdir, "rgb"), exist_ok=True)
        affine_lines = []
        depth_dir_made = False
        for frame in frames:
            img = load_image_png(frame.rgb_path)
            out = ImageBuffer(np.clip(a * img.data + b, 0.0, 1.0))
            save_image_png(os.path.join(cdir, "rgb", frame.frame_id + ".png"), out, bits=8)
            affine_lines.append(f"{frame.frame_id} {a:.12g} {b:.12g}")
            if frame.depth_path is not None:
                if not depth_dir_made:
                    os.makedirs(os.path.join(cdir, "depth"), exist_ok=True)
                    depth_dir_made = True
                shutil.copyfile(frame.depth_path, os.path.join(cdir, "depth", os.path.basename(frame.depth_path)))
            elif frame.right_path is not None:
                os.makedirs(os.path.join(cdir, "right"), exist_ok=True)
                right = load_image_png(frame.right_path)
                out_r = ImageBuffer(np.clip(a * right.data + b, 0.0, 1.0))
                save_image_png(os.path.join(cdir, "right", os.path.basename(frame.right_path)), out_r, bits=8)
        src_assoc = os.path.join(dataset.root, source, "associations.txt")
        if os.path.isfile(src_assoc):
            shutil.copyfile(src_assoc, os.path.join(cdir, "associations.txt"))
        with open(os.path.join(cdir, "affine.txt"), "w") as fh:
            fh.write("\n".join(affine_lines) + "\n")
        created.append(cdir)
    return created


# ---------------------------------------------------------------------------
# Report export


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


SUMMARY_COLUMNS = [
    "dataset",
    "condition",
    "transform",
    "config_hash",
    "frames_total",
    "frames_tracked_pct",
    "avg_trans_err_pct_dist",
    "avg_rot_err_deg_per_m",
    "total_distance_m",
]

FRAME_COLUMNS = [
    "timestamp",
    "tx",
    "ty",
    "tz",
    "qx",
    "qy",
    "qz",
    "qw",
    "trans_err",
    "rot_err_deg",
    "tracked",
    "keyframe_id",
]


def export_report(report: EvaluationReport, out_dir) -> dict:
    """summary.csv (one row) + frames.csv (one row per frame), 12 sig digits."""
    os.makedirs(out_dir, exist_ok=True)
    meta = report.metadata
    summary_path = os.path.join(out_dir, "summary.csv")
    row = [
        meta.get("dataset", "-"),
        meta.get("condition", "-"),
        meta.get("transform", "-"),
        meta.get("config_hash", "-"),
        len(report.per_frame),
        report.frames_tracked_pct,
        report.avg_trans_err_pct_dist,
        report.avg_rot_err_deg_per_m,
        report.total_distance,
    ]
    with open(summary_path, "w", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        fh.write(",".join(_fmt(x) for x in row) + "\n")

    frames_path = os.path.join(out_dir, "frames.csv")
    with open(frames_path, "w", newline="") as fh:
        fh.write(",".join(FRAME_COLUMNS) + "\n")
        for rec in report.per_frame:
            q = quat_from_rotation(rec.pose.rotation)
            t = rec.pose.translation
            vals = [
                rec.timestamp,
                t[0],
                t[1],
                t[2],
                q[0],
                q[1],
                q[2],
                q[3],
                rec.trans_err,
                rec.rot_err_deg,
                int(rec.tracked),
                rec.keyframe_id,
            ]
            fh.write(",".join(_fmt(x) for x in vals) + "\n")
    return {"summary": summary_path, "frames": frames_path}


def export_plot_data(report: EvaluationReport, path) -> None:
    """Error-vs-distance curve: one row per tracked segment end."""
    with open(path, "w", newline="") as fh:
        fh.write("cum_gt_distance_m,seg_trans_err_pct,seg_rot_err_deg_per_m\n")
        for rec in report.per_frame:
            if not np.isfinite(rec.trans_err) or rec.gt_dist <= 0:
                continue
            fh.write(
                f"{_fmt(rec.cum_gt_dist)},{_fmt(100.0 * rec.trans_err / rec.gt_dist)},"
                f"{_fmt(rec.rot_err_deg / rec.gt_dist)}\n"
            )
