"""Trajectory evaluation: relative pose errors normalized by distance.

Metrics follow the consecutive-segment relative-pose-error definition: for
each pair of consecutive *tracked* frames (i, j), the error transform is
inv(rel_gt) * rel_est; translational error sums its translation norms over
the ground-truth distance traveled (x100 for percent), rotational error
sums its rotation angles in degrees over the same distance. Untracked
frames only lower the frames-tracked percentage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .se3 import Pose, compose, inverse, rotation_angle

MIN_GT_DISTANCE = 1e-9  # meters; below this the percent metrics are undefined


class AlignmentError(ValueError):
    pass


@dataclass
class FrameRecord:
    timestamp: float
    pose: Pose  # world-from-camera estimate
    tracked: bool
    keyframe_id: int = -1
    trans_err: float = float("nan")  # segment error ending at this frame
    rot_err_deg: float = float("nan")
    gt_dist: float = float("nan")
    cum_gt_dist: float = float("nan")


@dataclass
class EvaluationReport:
    frames_tracked_pct: float
    avg_trans_err_pct_dist: float
    avg_rot_err_deg_per_m: float
    total_distance: float
    per_frame: list
    metadata: dict = field(default_factory=dict)


def evaluate(
    estimates: list,
    groundtruth: list,
    tracked: list,
    timestamps: list | None = None,
    keyframe_ids: list | None = None,
) -> EvaluationReport:
    """Relative-pose-error report over the tracked subsequence."""
    n = len(estimates)
    if len(groundtruth) != n or len(tracked) != n:
        raise AlignmentError(f"length mismatch: {n} est, {len(groundtruth)} gt, {len(tracked)} flags")
    if timestamps is None:
        timestamps = [float(i) for i in range(n)]
    if keyframe_ids is None:
        keyframe_ids = [-1] * n
    tracked_idx = [i for i in range(n) if tracked[i]]
    if len(tracked_idx) < 2:
        raise AlignmentError(f"need >= 2 tracked frames, got {len(tracked_idx)}")

    records = [
        FrameRecord(timestamp=timestamps[i], pose=estimates[i], tracked=bool(tracked[i]), keyframe_id=keyframe_ids[i])
        for i in range(n)
    ]
    cum = 0.0
    for a in range(1, n):
        cum += float(np.linalg.norm(compose(inverse(groundtruth[a - 1]), groundtruth[a]).translation))
        records[a].cum_gt_dist = cum
    records[0].cum_gt_dist = 0.0

    sum_trans = 0.0
    sum_rot_deg = 0.0
    sum_dist = 0.0
    for a, b in zip(tracked_idx[:-1], tracked_idx[1:]):
        rel_est = compose(inverse(estimates[a]), estimates[b])
        rel_gt = compose(inverse(groundtruth[a]), groundtruth[b])
        err = compose(inverse(rel_gt), rel_est)
        terr = float(np.linalg.norm(err.translation))
        rerr = float(np.degrees(rotation_angle(err)))
        dist = float(np.linalg.norm(rel_gt.translation))
        records[b].trans_err = terr
        records[b].rot_err_deg = rerr
        records[b].gt_dist = dist
        sum_trans += terr
        sum_rot_deg += rerr
        sum_dist += dist
    if sum_dist < MIN_GT_DISTANCE:
        raise AlignmentError("ground truth travels no distance over the tracked frames")

    return EvaluationReport(
        frames_tracked_pct=100.0 * len(tracked_idx) / n,
        avg_trans_err_pct_dist=100.0 * sum_trans / sum_dist,
        avg_rot_err_deg_per_m=sum_rot_deg / sum_dist,
        total_distance=sum_dist,
        per_frame=records,
    )
