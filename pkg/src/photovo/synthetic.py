"""Synthetic Lambertian RGB-D sequence generator.

A CPU ray-caster over textured quads (walls, boxes) renders small desk-scale
sequences with exact depth and ground-truth poses under four illumination
regimes: static lighting, a time-varying global affine map of the static
render, a moving point light, and a camera-attached light. Textures are
seeded, band-limited value noise, so renders are bit-reproducible and
gradients are meaningful. The generated directory layout is exactly what the
pipeline ingests, making synthetic and real data interchangeable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .image import DepthMap, ImageBuffer, save_depth_png, save_image_png
from .se3 import Pose, compose, exp_se3

RAY_EPS = 1e-2  # minimum hit distance, rejects self-intersections


class DegenerateScene(RuntimeError):
    pass


class TrajectoryMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Quad:
    """Finite textured rectangle: origin + two edge vectors."""

    origin: tuple
    edge_u: tuple
    edge_v: tuple
    base_color: tuple  # RGB albedo around which the texture modulates
    texture_seed: int
    texture_cells: int = 14
    texture_amp: float = 0.85


@dataclass(frozen=True)
class PointLight:
    position: tuple
    power: float  # intensity * m^2


@dataclass(frozen=True)
class IlluminationCondition:
    """One of: static, global_affine, local_light, flashlight."""

    kind: str = "static"
    # global_affine: I' = a(t) I + b(t), sinusoidal in the frame index.
    affine_a0: float = 1.0
    affine_a_amp: float = 0.0
    affine_b0: float = 0.0
    affine_b_amp: float = 0.0
    affine_period: float = 40.0
    affine_phase: float = 1.7
    # local_light: a point light orbiting the scene.
    orbit_center: tuple = (0.0, -0.5, 1.5)
    orbit_radius: float = 1.8
    orbit_period: float = 60.0
    orbit_power: float = 5.0
    # flashlight: light riding on the camera.
    flashlight_power: float = 6.0

    def affine_params(self, frame: int) -> tuple[float, float]:
        w = 2.0 * np.pi * frame / self.affine_period
        return (
            self.affine_a0 + self.affine_a_amp * np.sin(w),
            self.affine_b0 + self.affine_b_amp * np.sin(w + self.affine_phase),
        )


CONDITION_PRESETS = {
    "static": IlluminationCondition(kind="static"),
    # Amplitudes chosen to visibly break photometric consistency while
    # keeping clipping rare on the default scene.
    "global": IlluminationCondition(
        kind="global_affine", affine_a0=1.1, affine_a_amp=0.5, affine_b0=0.0, affine_b_amp=0.2
    ),
    "local": IlluminationCondition(kind="local_light"),
    "flashlight": IlluminationCondition(kind="flashlight"),
}


@dataclass(frozen=True)
class SceneSpec:
    quads: tuple
    trajectory: tuple  # world-from-camera poses
    intrinsics: CameraIntrinsics
    ambient: float = 0.3
    lights: tuple = (PointLight(position=(1.0, -1.5, 0.6), power=4.0),)
    min_depth_coverage: float = 0.8
    # Sub-rays per pixel axis. Textures are analytically band-limited, so
    # 1 already renders them alias-free; higher values additionally
    # anti-alias geometry silhouettes.
    supersample: int = 1

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)


def _sinusoid_bank(seed: int, n_waves: int, lam_min: float, lam_max: float):
    """Seeded random plane waves: (wavelengths, directions, phases, amps)."""
    rng = np.random.default_rng(seed)
    lam = np.exp(rng.uniform(np.log(lam_min), np.log(lam_max), n_waves))
    theta = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    amp = rng.uniform(0.5, 1.0, n_waves)
    amp = amp / np.sqrt(np.sum(amp * amp))
    return lam, theta, phase, amp


def _bank_eval(bank, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate a wave bank at metric surface coordinates.

    The result is analytically band-limited (nothing below lam_min exists)
    and a pure function of the surface point, so every view renders the
    same albedo and point sampling is exact away from grazing compression.
    """
    lam, theta, phase, amp = bank
    out = np.zeros_like(x)
    for k in range(lam.shape[0]):
        out += amp[k] * np.sin(
            (2.0 * np.pi / lam[k]) * (np.cos(theta[k]) * x + np.sin(theta[k]) * y) + phase[k]
        )
    return out


def _quad_albedo(quad: Quad, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Albedo at quad coordinates."""
    lu = np.linalg.norm(np.asarray(quad.edge_u, dtype=float))
    lv = np.linalg.norm(np.asarray(quad.edge_v, dtype=float))
    lam_min = min(lu, lv) / max(quad.texture_cells, 1)
    lam_max = max(min(lu, lv) / 2.0, 2.0 * lam_min)
    x = s * lu
    y = t * lv
    base = np.asarray(quad.base_color)
    mod = 0.5 * quad.texture_amp * _bank_eval(
        _sinusoid_bank(quad.texture_seed, 12, lam_min, lam_max), x, y
    )
    tint = 0.1 * quad.texture_amp * _bank_eval(
        _sinusoid_bank(quad.texture_seed + 101, 6, 2.0 * lam_min, lam_max), x, y
    )[..., None]
    albedo = base * (1.0 + mod)[..., None] + tint * base
    return np.clip(albedo, 0.02, 1.0)


def _trace(quads, origin: np.ndarray, dirs: np.ndarray):
    """Nearest quad hit per ray: (tau, quad index, s, t).

    dirs are z-depth parameterized (camera-frame z component 1), so tau is
    the camera-frame depth of the hit.
    """
    shape = dirs.shape[:-1]
    depth = np.full(shape, np.inf)
    hit_quad = np.full(shape, -1, dtype=np.int32)
    hit_s = np.zeros(shape)
    hit_t = np.zeros(shape)
    for qi, quad in enumerate(quads):
        p0 = np.asarray(quad.origin)
        eu = np.asarray(quad.edge_u)
        ev = np.asarray(quad.edge_v)
        n = np.cross(eu, ev)
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(np.abs(denom) > 1e-12, ((p0 - origin) @ n) / denom, np.inf)
        ok = (tau > RAY_EPS) & (tau < depth)
        if not ok.any():
            continue
        h = origin + tau[..., None] * dirs
        rel = h - p0
        s = (rel @ eu) / (eu @ eu)
        tt = (rel @ ev) / (ev @ ev)
        ok &= (s >= 0.0) & (s <= 1.0) & (tt >= 0.0) & (tt <= 1.0)
        depth[ok] = tau[ok]
        hit_quad[ok] = qi
        hit_s[ok] = s[ok]
        hit_t[ok] = tt[ok]
    return depth, hit_quad, hit_s, hit_t


def _shade(spec: SceneSpec, lights, origin, dirs, depth, hit_quad, hit_s, hit_t):
    """Lambertian shading of traced hits."""
    img = np.zeros(depth.shape + (3,))
    for qi, quad in enumerate(spec.quads):
        mask = hit_quad == qi
        if not mask.any():
            continue
        h = origin + depth[mask, None] * dirs[mask]
        n = np.cross(np.asarray(quad.edge_u), np.asarray(quad.edge_v))
        n = n / np.linalg.norm(n)
        albedo = _quad_albedo(quad, hit_s[mask], hit_t[mask])
        # Double-sided shading: the normal faces the camera.
        facing = np.sign((origin - h) @ n)
        nn = n[None, :] * np.where(facing == 0.0, 1.0, facing)[:, None]
        shade = np.full(albedo.shape[0], spec.ambient)
        for light in lights:
            to_l = np.asarray(light.position) - h
            r2 = np.maximum(np.einsum("ij,ij->i", to_l, to_l), 1e-6)
            cosine = np.maximum(np.einsum("ij,ij->i", to_l, nn) / np.sqrt(r2), 0.0)
            shade = shade + light.power * cosine / r2
        img[mask] = albedo * shade[:, None]
    return img


def render_frame(spec: SceneSpec, condition: IlluminationCondition, frame: int):
    """Renders (ImageBuffer RGB, DepthMap) for one trajectory pose.

    Intensity integrates supersample^2 sub-rays per pixel (band-limiting,
    like a physical sensor); depth is point-sampled at pixel centers.
    """
    K = spec.intrinsics
    ss = max(int(spec.supersample), 1)
    cam = spec.trajectory[frame]
    origin = cam.translation

    lights = list(spec.lights)
    if condition.kind == "local_light":
        w = 2.0 * np.pi * frame / condition.orbit_period
        c = np.asarray(condition.orbit_center)
        pos = c + condition.orbit_radius * np.array([np.sin(w), 0.0, np.cos(w)])
        lights = [PointLight(position=tuple(pos), power=condition.orbit_power)]
    elif condition.kind == "flashlight":
        lights = [PointLight(position=tuple(origin), power=condition.flashlight_power)]

    # Intensity pass on the sub-pixel grid.
    us = np.arange(K.width * ss, dtype=np.float64) / ss - (ss - 1) / (2.0 * ss)
    vs = np.arange(K.height * ss, dtype=np.float64) / ss - (ss - 1) / (2.0 * ss)
    u, v = np.meshgrid(us, vs)
    dirs_cam = np.stack([(u - K.cu) / K.fu, (v - K.cv) / K.fv, np.ones_like(u)], axis=-1)
    dirs = dirs_cam @ cam.rotation.T
    depth_ss, hit_quad, hit_s, hit_t = _trace(spec.quads, origin, dirs)
    img_ss = _shade(spec, lights, origin, dirs, depth_ss, hit_quad, hit_s, hit_t)
    img = img_ss.reshape(K.height, ss, K.width, ss, 3).mean(axis=(1, 3))

    # Geometry pass at pixel centers.
    if ss == 1:
        depth = depth_ss
    else:
        uc, vc = np.meshgrid(np.arange(K.width, dtype=np.float64), np.arange(K.height, dtype=np.float64))
        dirs_c = np.stack([(uc - K.cu) / K.fu, (vc - K.cv) / K.fv, np.ones_like(uc)], axis=-1) @ cam.rotation.T
        depth, _, _, _ = _trace(spec.quads, origin, dirs_c)

    finite = np.isfinite(depth)
    if finite.mean() < spec.min_depth_coverage:
        raise DegenerateScene(
            f"frame {frame}: {finite.mean():.0%} depth coverage < {spec.min_depth_coverage:.0%}"
        )

    img = np.clip(img, 0.0, 1.0)
    if condition.kind == "global_affine":
        a, b = condition.affine_params(frame)
        img = np.clip(a * img + b, 0.0, 1.0)

    depth_out = np.where(finite, depth, 0.0)
    return ImageBuffer(img), DepthMap(depth_out, finite)


def render_sequence(spec: SceneSpec, condition: IlluminationCondition):
    """All frames: (images, depth maps, ground-truth poses)."""
    images, depths = [], []
    for i in range(spec.n_frames):
        img, d = render_frame(spec, condition, i)
        images.append(img)
        depths.append(d)
    return images, depths, list(spec.trajectory)


def default_scene(
    n_frames: int = 100,
    width: int = 256,
    height: int = 192,
    seed: int = 7,
    forward: float = 1.8,
    yaw_deg: float = 8.0,
) -> SceneSpec:
    """Textured room with boxes at staggered depths; forward motion with
    yaw and sway. A wide field of view keeps side walls, floor and ceiling
    visible, which separates rotation from translation well."""
    f = 150.0 * width / 256.0  # constant FOV across render resolutions
    K = CameraIntrinsics(fu=f, fv=f, cu=(width - 1) / 2.0, cv=(height - 1) / 2.0, width=width, height=height)
    quads = [
        # Room shell (x right, y down, z forward; camera starts at origin).
        Quad((-2.3, -1.7, 3.8), (4.6, 0, 0), (0, 3.2, 0), (0.75, 0.68, 0.58), seed + 1),
        Quad((-2.3, 1.5, -0.5), (4.6, 0, 0), (0, 0, 4.3), (0.55, 0.52, 0.48), seed + 2),
        Quad((-2.3, -1.7, -0.5), (4.6, 0, 0), (0, 0, 4.3), (0.62, 0.64, 0.66), seed + 3),
        Quad((-2.3, -1.7, -0.5), (0, 3.2, 0), (0, 0, 4.3), (0.7, 0.55, 0.45), seed + 4),
        Quad((2.3, -1.7, -0.5), (0, 3.2, 0), (0, 0, 4.3), (0.45, 0.58, 0.7), seed + 5),
    ]
    boxes = [
        ((-1.3, 0.7, 1.9), (0.65, 0.8, 0.5), (0.72, 0.4, 0.35), seed + 10),
        ((0.55, 0.45, 2.6), (0.8, 1.05, 0.55), (0.38, 0.62, 0.42), seed + 20),
        ((-0.55, -1.15, 3.0), (0.7, 0.6, 0.45), (0.45, 0.45, 0.7), seed + 30),
    ]
    for (bx, by, bz), (sx, sy, sz), color, bseed in boxes:
        quads += _box_quads((bx, by, bz), (sx, sy, sz), color, bseed)

    trajectory = []
    for i in range(n_frames):
        s = i / max(n_frames - 1, 1)
        yaw = np.radians(yaw_deg) * np.sin(2.0 * np.pi * s)
        tx = 0.15 * np.sin(2.0 * np.pi * s * 1.5)
        ty = 0.05 * np.sin(2.0 * np.pi * s * 2.0 + 1.0)
        tz = forward * s
        trajectory.append(compose(Pose(translation=(tx, ty, tz)), exp_se3([0, 0, 0, 0, yaw, 0])))
    return SceneSpec(quads=tuple(quads), trajectory=tuple(trajectory), intrinsics=K)


def _box_quads(corner, size, color, seed) -> list:
    x, y, z = corner
    sx, sy, sz = size
    cells = 3
    amp = 0.7

    def q(o, eu, ev, ds):
        return Quad(o, eu, ev, color, seed + ds, texture_cells=cells, texture_amp=amp)

    return [
        q((x, y, z), (sx, 0, 0), (0, sy, 0), 0),  # front (toward -z)
        q((x, y, z + sz), (sx, 0, 0), (0, sy, 0), 1),  # back
        q((x, y, z), (0, sy, 0), (0, 0, sz), 2),  # left
        q((x + sx, y, z), (0, sy, 0), (0, 0, sz), 3),  # right
        q((x, y, z), (sx, 0, 0), (0, 0, sz), 4),  # top (y is down)
    ]


# ---------------------------------------------------------------------------
# Dataset emission (the layout pipeline ingestion reads).


def frame_name(i: int) -> str:
    return f"{i:06d}"


def write_dataset(
    root,
    spec: SceneSpec,
    conditions: dict | None = None,
    depth_scale: float = 1.0 / 5000.0,
    fps: float = 30.0,
) -> None:
    """Renders and writes calibration, ground truth, and condition dirs.

    Layout:
      root/calibration.txt
      root/groundtruth.txt            timestamp tx ty tz qx qy qz qw
      root/<condition>/rgb/*.png      8-bit RGB
      root/<condition>/depth/*.png    16-bit, depth_scale meters per unit
      root/<condition>/associations.txt
      root/<condition>/affine.txt     per-frame (a, b), global_affine only
    """
    from .se3 import quat_from_rotation

    if conditions is None:
        conditions = {"static": CONDITION_PRESETS["static"]}
    os.makedirs(root, exist_ok=True)
    K = spec.intrinsics
    with open(os.path.join(root, "calibration.txt"), "w") as fh:
        fh.write(
            f"fu = {K.fu!r}\nfv = {K.fv!r}\ncu = {K.cu!r}\ncv = {K.cv!r}\n"
            f"width = {K.width}\nheight = {K.height}\ndepth_scale = {depth_scale!r}\n"
        )
    with open(os.path.join(root, "groundtruth.txt"), "w") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for i, pose in enumerate(spec.trajectory):
            q = quat_from_rotation(pose.rotation)
            t = pose.translation
            fh.write(
                f"{i / fps:.6f} {t[0]:.12g} {t[1]:.12g} {t[2]:.12g} "
                f"{q[0]:.12g} {q[1]:.12g} {q[2]:.12g} {q[3]:.12g}\n"
            )

    for name, condition in conditions.items():
        cdir = os.path.join(root, name)
        os.makedirs(os.path.join(cdir, "rgb"), exist_ok=True)
        os.makedirs(os.path.join(cdir, "depth"), exist_ok=True)
        assoc = []
        affine_lines = []
        for i in range(spec.n_frames):
            img, depth = render_frame(spec, condition, i)
            fname = frame_name(i)
            save_image_png(os.path.join(cdir, "rgb", fname + ".png"), img, bits=8)
            save_depth_png(os.path.join(cdir, "depth", fname + ".png"), depth, scale=depth_scale)
            ts = f"{i / fps:.6f}"
            assoc.append(f"{ts} rgb/{fname}.png {ts} depth/{fname}.png")
            if condition.kind == "global_affine":
                a, b = condition.affine_params(i)
                affine_lines.append(f"{fname} {a:.12g} {b:.12g}")
        with open(os.path.join(cdir, "associations.txt"), "w") as fh:
            fh.write("\n".join(assoc) + "\n")
        if affine_lines:
            with open(os.path.join(cdir, "affine.txt"), "w") as fh:
                fh.write("\n".join(affine_lines) + "\n")


def make_training_pairs(root, canonical: str, others: list) -> list:
    """(input_path, target_path, frame_name) tuples across conditions.

    Every condition directory must have been rendered over the identical
    trajectory (shared groundtruth.txt makes that structural here, but the
    frame sets must still agree).
    """
    canon_dir = os.path.join(root, canonical, "rgb")
    if not os.path.isdir(canon_dir):
        raise TrajectoryMismatch(f"canonical condition {canonical!r} not rendered")
    canon_frames = sorted(os.listdir(canon_dir))
    pairs = []
    for cond in others:
        cdir = os.path.join(root, cond, "rgb")
        if not os.path.isdir(cdir):
            raise TrajectoryMismatch(f"condition {cond!r} not rendered")
        frames = sorted(os.listdir(cdir))
        if frames != canon_frames:
            raise TrajectoryMismatch(f"condition {cond!r} frames differ from {canonical!r}")
        for f in frames:
            pairs.append((os.path.join(cdir, f), os.path.join(canon_dir, f), os.path.splitext(f)[0]))
    return pairs
