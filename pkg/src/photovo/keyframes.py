"""Keyframe lifecycle: creation, nearest-keyframe queries, map persistence.

A keyframe owns everything the tracker needs, precomputed once at creation:
appearance-transformed luminance pyramid, depth pyramid, gradients, the
selected high-gradient pixels, their back-projected points, and the
per-pixel depth noise. Keyframes are immutable after creation.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .config import KeyframeConfig, TrackerConfig
from .image import (
    DepthMap,
    GradientField,
    ImageBuffer,
    build_pyramid,
    depth_discontinuity_mask,
    downsample_depth,
    gradients,
    load_depth_png,
    load_image_png,
    luminance,
    save_depth_png,
    save_image_png,
    select_pixels,
    smooth_image,
)
from .se3 import Pose, pose_distance, quat_from_rotation, rotation_from_quat

MAP_FORMAT_VERSION = 1


class EmptyMap(ValueError):
    pass


class IoFailure(OSError):
    pass


class FormatVersionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class KeyframeLevel:
    """Per-pyramid-level tracking data for one keyframe."""

    intrinsics: CameraIntrinsics
    image: ImageBuffer  # luminance, appearance-transformed
    grad: GradientField
    pixel_idx: np.ndarray  # flat row-major indices of selected pixels
    points: np.ndarray  # (N, 3) back-projected reference points
    ref_vals: np.ndarray  # (N,)
    grad_u: np.ndarray  # (N,)
    grad_v: np.ndarray  # (N,)
    sigma_d: np.ndarray  # (N,) depth noise sigma = k * z^2


@dataclass(frozen=True)
class Keyframe:
    id: int
    frame_id: str
    pose: Pose  # world-from-keyframe
    levels: tuple  # of KeyframeLevel, level 0 first
    image: ImageBuffer  # level-0 luminance (persisted payload)
    depth: DepthMap  # level-0 depth (persisted payload)

    @property
    def n_selected(self) -> int:
        return int(self.levels[0].pixel_idx.shape[0])


def create_keyframe(
    kf_id: int,
    frame_id: str,
    image: ImageBuffer,
    depth: DepthMap,
    K: CameraIntrinsics,
    pose: Pose,
    cfg: TrackerConfig,
) -> Keyframe:
    """Builds all derived tracking data; `image` must already be transformed."""
    raw_lum = luminance(image)
    # The persisted payload stays unsmoothed; smoothing is re-applied on
    # load so a map round-trip cannot compound it.
    lum = smooth_image(raw_lum, cfg.pre_smoothing)
    pyr = build_pyramid(lum, K, cfg.pyramid_levels)
    levels = []
    d = depth
    for li in range(cfg.pyramid_levels):
        img_l, K_l = pyr[li]
        grad = gradients(img_l)
        idx = select_pixels(grad, d, cfg.gradient_threshold)
        # Depth edges violate the warp model under parallax (occlusion
        # bands); their pixels are strong gradients but poison the solve.
        # Coarse levels may lose almost everything to the mask (grazing
        # surfaces look like jumps there), so fall back to the unmasked set
        # when too little survives.
        edge = depth_discontinuity_mask(d)
        masked = idx[~edge.reshape(-1)[idx]]
        if masked.shape[0] >= max(30, idx.shape[0] // 4):
            idx = masked
        v = idx // img_l.width
        u = idx % img_l.width
        z = d.data[v, u]
        points = np.stack([z * (u - K_l.cu) / K_l.fu, z * (v - K_l.cv) / K_l.fv, z], axis=1)
        levels.append(
            KeyframeLevel(
                intrinsics=K_l,
                image=img_l,
                grad=grad,
                pixel_idx=idx,
                points=points,
                ref_vals=img_l.data[v, u],
                grad_u=grad.du[v, u],
                grad_v=grad.dv[v, u],
                sigma_d=cfg.depth_noise_k * z * z,
            )
        )
        if li + 1 < cfg.pyramid_levels:
            d = downsample_depth(d)
    return Keyframe(id=kf_id, frame_id=frame_id, pose=pose, levels=tuple(levels), image=raw_lum, depth=depth)


def should_create_keyframe(active_pose: Pose, current_pose: Pose, thresholds: KeyframeConfig) -> bool:
    """True once translation or rotation to the active keyframe crosses a threshold."""
    t_dist, r_dist = pose_distance(active_pose, current_pose)
    return t_dist > thresholds.translation_threshold or np.degrees(r_dist) > thresholds.rotation_threshold_deg


@dataclass
class KeyframeMap:
    thresholds: KeyframeConfig
    keyframes: list = None

    def __post_init__(self):
        if self.keyframes is None:
            self.keyframes = []

    def add(self, kf: Keyframe) -> None:
        if kf.id != len(self.keyframes):
            raise ValueError(f"keyframe ids must be dense, expected {len(self.keyframes)} got {kf.id}")
        self.keyframes.append(kf)

    def __len__(self) -> int:
        return len(self.keyframes)


def nearest_keyframe(kf_map: KeyframeMap, pose: Pose) -> Keyframe:
    """Closest keyframe by translation distance; ties go to the lower id."""
    if not kf_map.keyframes:
        raise EmptyMap("map has no keyframes")
    best = None
    best_d = np.inf
    for kf in kf_map.keyframes:
        d = float(np.linalg.norm(kf.pose.translation - pose.translation))
        if d < best_d:
            best, best_d = kf, d
    return best


def select_tracking_keyframe(kf_map: KeyframeMap, active: Keyframe, pose: Pose) -> Keyframe:
    """Nearest-keyframe query with switch hysteresis (relocalization mode)."""
    candidate = nearest_keyframe(kf_map, pose)
    if candidate.id == active.id:
        return active
    d_active = float(np.linalg.norm(active.pose.translation - pose.translation))
    d_cand = float(np.linalg.norm(candidate.pose.translation - pose.translation))
    margin = kf_map.thresholds.switch_hysteresis * kf_map.thresholds.translation_threshold
    return candidate if d_cand < d_active - margin else active


# ---------------------------------------------------------------------------
# Persistence: a directory with a plain-text manifest, per-keyframe 16-bit
# PNGs (image + depth), and a 56-byte little-endian pose record
# (tx ty tz qx qy qz qw, float64).


def save_map(kf_map: KeyframeMap, path, K: CameraIntrinsics, cfg: TrackerConfig, depth_scale: float) -> None:
    os.makedirs(path, exist_ok=True)
    lines = [
        f"format_version = {MAP_FORMAT_VERSION}",
        "pose_convention = world_from_keyframe; p_world = R p + t; left-multiplicative twist updates",
        "quaternion_order = x,y,z,w",
        f"count = {len(kf_map.keyframes)}",
        f"fu = {K.fu!r}",
        f"fv = {K.fv!r}",
        f"cu = {K.cu!r}",
        f"cv = {K.cv!r}",
        f"width = {K.width}",
        f"height = {K.height}",
        f"depth_scale = {depth_scale!r}",
        f"translation_threshold = {kf_map.thresholds.translation_threshold!r}",
        f"rotation_threshold_deg = {kf_map.thresholds.rotation_threshold_deg!r}",
        f"pyramid_levels = {cfg.pyramid_levels}",
        f"pre_smoothing = {cfg.pre_smoothing}",
        f"gradient_threshold = {cfg.gradient_threshold!r}",
        f"image_noise_sigma = {cfg.image_noise_sigma!r}",
        f"depth_noise_k = {cfg.depth_noise_k!r}",
    ]
    for kf in kf_map.keyframes:
        lines.append(f"frame_{kf.id:06d} = {kf.frame_id}")
    with open(os.path.join(path, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for kf in kf_map.keyframes:
        save_image_png(os.path.join(path, f"kf_{kf.id:06d}_image.png"), kf.image, bits=16)
        save_depth_png(os.path.join(path, f"kf_{kf.id:06d}_depth.png"), kf.depth, scale=depth_scale)
        q = quat_from_rotation(kf.pose.rotation)
        rec = struct.pack("<7d", *kf.pose.translation, *q)
        with open(os.path.join(path, f"kf_{kf.id:06d}_pose.bin"), "wb") as fh:
            fh.write(rec)


def load_map(path, cfg: TrackerConfig | None = None):
    """Returns (KeyframeMap, CameraIntrinsics, TrackerConfig).

    Keyframe-derived parameters stored in the manifest override the passed
    config so the rebuilt keyframes match the mapping run; solver-only knobs
    come from `cfg` (defaults when omitted). Loading never yields a partial
    map: any missing or truncated file raises before a map is returned.
    """
    manifest_path = os.path.join(path, "manifest.txt")
    if not os.path.isfile(manifest_path):
        raise IoFailure(f"no manifest at {manifest_path}")
    meta = {}
    frames = {}
    with open(manifest_path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            if key.startswith("frame_"):
                frames[int(key[6:])] = val
            else:
                meta[key] = val
    try:
        version = int(meta["format_version"])
    except (KeyError, ValueError) as exc:
        raise FormatVersionMismatch(f"unreadable format version: {exc}") from exc
    if version != MAP_FORMAT_VERSION:
        raise FormatVersionMismatch(f"map format {version}, expected {MAP_FORMAT_VERSION}")
    try:
        count = int(meta["count"])
        K = CameraIntrinsics(
            fu=float(meta["fu"]),
            fv=float(meta["fv"]),
            cu=float(meta["cu"]),
            cv=float(meta["cv"]),
            width=int(meta["width"]),
            height=int(meta["height"]),
        )
        depth_scale = float(meta["depth_scale"])
        thresholds = KeyframeConfig(
            translation_threshold=float(meta["translation_threshold"]),
            rotation_threshold_deg=float(meta["rotation_threshold_deg"]),
        )
        base = cfg if cfg is not None else TrackerConfig()
        from dataclasses import replace

        kf_cfg = replace(
            base,
            pyramid_levels=int(meta["pyramid_levels"]),
            pre_smoothing=int(meta.get("pre_smoothing", 0)),
            gradient_threshold=float(meta["gradient_threshold"]),
            image_noise_sigma=float(meta["image_noise_sigma"]),
            depth_noise_k=float(meta["depth_noise_k"]),
        )
    except (KeyError, ValueError) as exc:
        raise IoFailure(f"manifest incomplete: {exc}") from exc

    keyframes = []
    for i in range(count):
        img_path = os.path.join(path, f"kf_{i:06d}_image.png")
        depth_path = os.path.join(path, f"kf_{i:06d}_depth.png")
        pose_path = os.path.join(path, f"kf_{i:06d}_pose.bin")
        for p in (img_path, depth_path, pose_path):
            if not os.path.isfile(p):
                raise IoFailure(f"missing map file {p}")
        try:
            image = load_image_png(img_path)
            depth = load_depth_png(depth_path, scale=depth_scale)
        except OSError as exc:
            raise IoFailure(f"unreadable map payload: {exc}") from exc
        with open(pose_path, "rb") as fh:
            rec = fh.read()
        if len(rec) != struct.calcsize("<7d"):
            raise IoFailure(f"truncated pose record {pose_path}")
        vals = struct.unpack("<7d", rec)
        pose = Pose(rotation_from_quat(vals[3:]), np.array(vals[:3]))
        keyframes.append(
            create_keyframe(i, frames.get(i, f"kf_{i:06d}"), image, depth, K, pose, kf_cfg)
        )
    kf_map = KeyframeMap(thresholds=thresholds)
    for kf in keyframes:
        kf_map.add(kf)
    return kf_map, K, kf_cfg
