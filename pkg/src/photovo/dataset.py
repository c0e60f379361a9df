"""Dataset ingestion: calibration, ground truth, per-condition frame lists.

Layout (written by the synthetic generator, mirrors TUM RGB-D):

  root/calibration.txt      key = value (fu fv cu cv width height
                            depth_scale [baseline])
  root/groundtruth.txt      timestamp tx ty tz qx qy qz qw
  root/<condition>/rgb/*.png
  root/<condition>/depth/*.png       (RGB-D) or
  root/<condition>/right/*.png       (stereo)
  root/<condition>/associations.txt  "ts rgb ts depth" per line
  root/<condition>/affine.txt        optional per-frame (a, b) metadata

Conditions without an associations file fall back to pairing numbered
frames with identical filenames (VKITTI-style exports).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, StereoModel
from .image import DepthMap, ImageBuffer, load_depth_png, load_image_png
from .se3 import Pose, rotation_from_quat

GT_TIMESTAMP_TOLERANCE = 0.02  # seconds


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: float
    frame_id: str  # rgb filename stem
    rgb_path: str
    depth_path: str | None = None
    right_path: str | None = None

    def load_rgb(self) -> ImageBuffer:
        return load_image_png(self.rgb_path)


@dataclass
class Dataset:
    root: str
    intrinsics: CameraIntrinsics
    depth_scale: float
    baseline: float | None
    conditions: dict  # name -> list[Frame]
    groundtruth: list  # [(timestamp, Pose)]

    def frames(self, condition: str) -> list:
        if condition not in self.conditions:
            raise DatasetError(f"condition {condition!r} not in {sorted(self.conditions)}")
        return self.conditions[condition]

    def load_depth(self, frame: Frame) -> DepthMap:
        if frame.depth_path is None:
            raise DatasetError(f"frame {frame.frame_id} has no depth image")
        return load_depth_png(frame.depth_path, scale=self.depth_scale)

    def stereo_model(self) -> StereoModel:
        if self.baseline is None:
            raise DatasetError("calibration has no baseline; stereo not available")
        return StereoModel(intrinsics=self.intrinsics, baseline=self.baseline)

    def gt_pose_at(self, timestamp: float) -> Pose:
        """Ground-truth pose nearest in time; loose tolerance rejects gaps."""
        times = np.array([t for t, _ in self.groundtruth])
        i = int(np.argmin(np.abs(times - timestamp)))
        if abs(times[i] - timestamp) > GT_TIMESTAMP_TOLERANCE:
            raise DatasetError(f"no ground truth near t={timestamp:.6f}")
        return self.groundtruth[i][1]


def _parse_kv(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def load_trajectory(path) -> list:
    """TUM-format trajectory: [(timestamp, Pose)] sorted by time."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 8:
                raise DatasetError(f"bad trajectory line in {path}: {line!r}")
            ts = float(parts[0])
            t = np.array([float(x) for x in parts[1:4]])
            q = np.array([float(x) for x in parts[4:8]])
            out.append((ts, Pose(rotation_from_quat(q), t)))
    out.sort(key=lambda p: p[0])
    return out


def _read_associations(cond_dir) -> list:
    path = os.path.join(cond_dir, "associations.txt")
    frames = []
    if os.path.isfile(path):
        with open(path) as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise DatasetError(f"bad association line: {line!r}")
                ts = float(parts[0])
                rgb_rel, second_rel = parts[1], parts[3]
                frames.append((ts, rgb_rel, second_rel))
    else:
        # Numbered-frame fallback: identical filenames in rgb/ and
        # depth/ (or right/), timestamps from the frame index.
        rgb_dir = os.path.join(cond_dir, "rgb")
        if not os.path.isdir(rgb_dir):
            return []
        second = "depth" if os.path.isdir(os.path.join(cond_dir, "depth")) else "right"
        for i, name in enumerate(sorted(os.listdir(rgb_dir))):
            frames.append((i / 30.0, f"rgb/{name}", f"{second}/{name}"))
    return frames


def _build_frames(cond_dir, raw) -> list:
    frames = []
    seen_rgb, seen_second = set(), set()
    last_ts = -np.inf
    for i, (ts, rgb_rel, second_rel) in enumerate(raw):
        if ts <= last_ts:
            raise DatasetError(f"timestamps not strictly increasing at {rgb_rel}")
        last_ts = ts
        if rgb_rel in seen_rgb or second_rel in seen_second:
            raise DatasetError(f"association not bijective at {rgb_rel}")
        seen_rgb.add(rgb_rel)
        seen_second.add(second_rel)
        rgb_path = os.path.join(cond_dir, rgb_rel)
        second_path = os.path.join(cond_dir, second_rel)
        for p in (rgb_path, second_path):
            if not os.path.isfile(p):
                raise DatasetError(f"missing frame file {p}")
        stem = os.path.splitext(os.path.basename(rgb_rel))[0]
        is_stereo = second_rel.split("/")[0] == "right"
        frames.append(
            Frame(
                index=i,
                timestamp=ts,
                frame_id=stem,
                rgb_path=rgb_path,
                depth_path=None if is_stereo else second_path,
                right_path=second_path if is_stereo else None,
            )
        )
    return frames


def load_dataset(root) -> Dataset:
    calib_path = os.path.join(root, "calibration.txt")
    if not os.path.isfile(calib_path):
        raise DatasetError(f"no calibration.txt under {root}")
    kv = _parse_kv(calib_path)
    try:
        K = CameraIntrinsics(
            fu=float(kv["fu"]),
            fv=float(kv["fv"]),
            cu=float(kv["cu"]),
            cv=float(kv["cv"]),
            width=int(kv["width"]),
            height=int(kv["height"]),
        )
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"bad calibration: {exc}") from exc
    depth_scale = float(kv.get("depth_scale", 1.0 / 5000.0))
    baseline = float(kv["baseline"]) if "baseline" in kv else None

    gt_path = os.path.join(root, "groundtruth.txt")
    groundtruth = load_trajectory(gt_path) if os.path.isfile(gt_path) else []

    conditions = {}
    for entry in sorted(os.listdir(root)):
        cond_dir = os.path.join(root, entry)
        if not os.path.isdir(cond_dir):
            continue
        raw = _read_associations(cond_dir)
        if raw:
            conditions[entry] = _build_frames(cond_dir, raw)
    if not conditions:
        raise DatasetError(f"no condition directories under {root}")
    return Dataset(
        root=str(root),
        intrinsics=K,
        depth_scale=depth_scale,
        baseline=baseline,
        conditions=conditions,
        groundtruth=groundtruth,
    )
